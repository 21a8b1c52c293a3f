// Copyright 2026 The Saturn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Deterministic toy trainers: a self-supervised text embedder (windowed
// PPMI factorized by seeded orthogonal iteration) and a logistic-regression
// head fine-tuned on top of it.

namespace saturn::modelkit {

using Token = std::string;
using Document = std::vector<Token>;

struct Corpus {
  std::vector<Document> documents;

  std::size_t total_tokens() const;
};

/// Whitespace split plus ASCII case folding.
Document tokenize(std::string_view line);
/// One document per line; blank lines are skipped.
Corpus parse_corpus(std::string_view text);
Corpus read_corpus(const std::filesystem::path& path);

/// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

struct PpmiMatrix {
  std::vector<Token> vocabulary;  // sorted; index = row
  Matrix values;
};

/// M[i][j] = max(0, ln(c_ij * T / (c_i * c_j))) where c_i are unigram
/// counts, T the token total and c_ij the symmetric within-window
/// co-occurrence count rescaled so that sum_ij c_ij = T.
PpmiMatrix ppmi(const Corpus& corpus, int window);

struct Eigenpairs {
  Matrix vectors;              // n x k, orthonormal columns
  std::vector<double> values;  // descending by magnitude
  int iterations = 0;
};

/// Rank-k eigen-factorization of a symmetric matrix by seeded block
/// orthogonal iteration with Rayleigh-Ritz extraction. Stops after
/// max_iterations or when the leading Ritz values change by less than tol
/// (relative).
Eigenpairs factorize_symmetric(const Matrix& m, int k, std::uint64_t seed, int max_iterations = 50,
                               double tol = 1e-6);

struct EmbedderArtifact {
  std::vector<Token> vocabulary;
  Matrix matrix;  // |V| x dim
  int dim = 0;
  int window = 0;
  std::uint64_t seed = 0;

  std::optional<std::size_t> index_of(std::string_view token) const;
};

struct ClassifierArtifact {
  std::vector<double> weights;
  double bias = 0.0;
  std::string parent;  // digest of the serialized embedder
};

struct EvalMetrics {
  double accuracy = 0.0;
  double auc = 0.0;
  std::size_t sample_count = 0;
};

struct LabeledExample {
  Document tokens;
  int label = 0;
};

struct TrainOptions {
  double learning_rate = 0.1;
  int iterations = 500;
  double l2 = 1e-4;
};

EmbedderArtifact pretrain_embedder(const Corpus& corpus, int dim, int window, std::uint64_t seed);

/// Mean of the in-vocabulary token rows; zero vector when none are known.
std::vector<double> embed_document(const EmbedderArtifact& artifact, std::span<const Token> tokens);

ClassifierArtifact finetune_classifier(const EmbedderArtifact& artifact,
                                       std::span<const LabeledExample> examples,
                                       const TrainOptions& options = {});

/// Logistic regression on precomputed features by full-batch gradient
/// descent from zero.
ClassifierArtifact fit_logistic(std::span<const std::vector<double>> features, std::span<const int> labels,
                                const TrainOptions& options, std::string parent);

struct LogisticGradient {
  std::vector<double> weights;
  double bias = 0.0;
};

/// Mean log-loss plus l2 * ||w||^2 (bias unpenalized).
double logistic_loss(std::span<const double> weights, double bias,
                     std::span<const std::vector<double>> features, std::span<const int> labels, double l2);
LogisticGradient logistic_gradient(std::span<const double> weights, double bias,
                                   std::span<const std::vector<double>> features, std::span<const int> labels,
                                   double l2);

double sigmoid(double z);
double predict(const ClassifierArtifact& classifier, std::span<const double> features);

EvalMetrics evaluate(const ClassifierArtifact& classifier, const EmbedderArtifact& embedder,
                     std::span<const LabeledExample> examples);
/// Accuracy at 0.5 and rank-statistic AUC (ties count one half).
EvalMetrics evaluate_scores(std::span<const double> scores, std::span<const int> labels);

enum class ArtifactKind { kEmbedder, kClassifier };

std::vector<std::uint8_t> serialize(const EmbedderArtifact& artifact);
std::vector<std::uint8_t> serialize(const ClassifierArtifact& artifact);
std::optional<ArtifactKind> artifact_kind(std::span<const std::uint8_t> bytes);
EmbedderArtifact deserialize_embedder(std::span<const std::uint8_t> bytes);
ClassifierArtifact deserialize_classifier(std::span<const std::uint8_t> bytes);

inline constexpr std::string_view kEmbedderMediaType = "application/x-saturn-embedder";
inline constexpr std::string_view kClassifierMediaType = "application/x-saturn-classifier";

}  // namespace saturn::modelkit
