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
#include "saturn/modelkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include "saturn/bytes.hpp"
#include "saturn/config.hpp"
#include "saturn/digest.hpp"
#include "saturn/error.hpp"

namespace saturn::modelkit {
namespace {

constexpr std::string_view kEmbedderMagic = "SKE1";
constexpr std::string_view kClassifierMagic = "SKC1";

// Cyclic Jacobi rotations on a small symmetric matrix. Returns eigenvalues
// in a and eigenvectors as the columns of v.
void jacobi_eigen(Matrix& a, Matrix& v) {
  const std::size_t n = a.rows;
  v = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;
  double total = 0.0;
  for (double x : a.data) total += x * x;
  if (total == 0.0) return;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * total) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (apq == 0.0) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          double arp = a(r, p);
          double arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          double apr = a(p, r);
          double aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
        for (std::size_t r = 0; r < n; ++r) {
          double vrp = v(r, p);
          double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }
}

// Modified Gram-Schmidt on the columns of q. Columns that collapse (rank
// deficiency) are replaced with fresh random directions from rng.
void orthonormalize(Matrix& q, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const std::size_t n = q.rows;
  for (std::size_t c = 0; c < q.cols; ++c) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      double before = 0.0;
      for (std::size_t r = 0; r < n; ++r) before += q(r, c) * q(r, c);
      for (std::size_t prev = 0; prev < c; ++prev) {
        double dot = 0.0;
        for (std::size_t r = 0; r < n; ++r) dot += q(r, prev) * q(r, c);
        for (std::size_t r = 0; r < n; ++r) q(r, c) -= dot * q(r, prev);
      }
      double norm = 0.0;
      for (std::size_t r = 0; r < n; ++r) norm += q(r, c) * q(r, c);
      norm = std::sqrt(norm);
      if (norm > 1e-10 * std::max(1.0, std::sqrt(before))) {
        for (std::size_t r = 0; r < n; ++r) q(r, c) /= norm;
        break;
      }
      for (std::size_t r = 0; r < n; ++r) q(r, c) = uni(rng);
    }
  }
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

// H = Q^T (M Q)
Matrix projected(const Matrix& q, const Matrix& mq) {
  Matrix h(q.cols, q.cols);
  for (std::size_t i = 0; i < q.cols; ++i)
    for (std::size_t j = 0; j < q.cols; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < q.rows; ++r) s += q(r, i) * mq(r, j);
      h(i, j) = s;
    }
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = i + 1; j < h.cols; ++j) h(i, j) = h(j, i) = 0.5 * (h(i, j) + h(j, i));
  return h;
}

// Indices of eigenvalues ordered by descending magnitude, larger value first on ties.
std::vector<std::size_t> magnitude_order(const Matrix& eig) {
  std::vector<std::size_t> idx(eig.rows);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    double ma = std::abs(eig(a, a));
    double mb = std::abs(eig(b, b));
    if (ma != mb) return ma > mb;
    return eig(a, a) > eig(b, b);
  });
  return idx;
}

void validate_labels(std::span<const int> labels) {
  bool pos = false;
  bool neg = false;
  for (int y : labels) {
    require(y == 0 || y == 1, ErrorCode::kInvalidInput, "labels must be 0 or 1");
    (y == 1 ? pos : neg) = true;
  }
  require(pos && neg, ErrorCode::kInvalidInput, "training set needs at least one example of each label");
}

}  // namespace

std::size_t Corpus::total_tokens() const {
  std::size_t t = 0;
  for (const auto& d : documents) t += d.size();
  return t;
}

Document tokenize(std::string_view line) {
  Document out = split_whitespace(line);
  for (auto& tok : out) {
    for (auto& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

Corpus parse_corpus(std::string_view text) {
  Corpus c;
  for (const auto& line : split(text, '\n')) {
    auto doc = tokenize(line);
    if (!doc.empty()) c.documents.push_back(std::move(doc));
  }
  return c;
}

Corpus read_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

PpmiMatrix ppmi(const Corpus& corpus, int window) {
  require(window >= 1, ErrorCode::kInvalidInput, "window must be >= 1");
  const std::size_t total = corpus.total_tokens();
  require(total >= 1, ErrorCode::kInvalidInput, "corpus is empty");

  PpmiMatrix out;
  std::map<std::string_view, std::size_t> index;
  for (const auto& doc : corpus.documents)
    for (const auto& tok : doc) index.emplace(tok, 0);
  out.vocabulary.reserve(index.size());
  for (auto& [tok, i] : index) {
    i = out.vocabulary.size();
    out.vocabulary.emplace_back(tok);
  }
  const std::size_t n = out.vocabulary.size();

  std::vector<double> unigram(n, 0.0);
  Matrix pairs(n, n);
  double pair_total = 0.0;
  const auto w = static_cast<std::size_t>(window);
  for (const auto& doc : corpus.documents) {
    std::vector<std::size_t> ids;
    ids.reserve(doc.size());
    for (const auto& tok : doc) ids.push_back(index.at(tok));
    for (std::size_t p = 0; p < ids.size(); ++p) {
      unigram[ids[p]] += 1.0;
      for (std::size_t q = p + 1; q < ids.size() && q <= p + w; ++q) {
        pairs(ids[p], ids[q]) += 1.0;
        pairs(ids[q], ids[p]) += 1.0;
        pair_total += 2.0;
      }
    }
  }

  out.values = Matrix(n, n);
  if (pair_total == 0.0) return out;
  const double t = static_cast<double>(total);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double c = pairs(i, j);
      if (c == 0.0) continue;
      double scaled = c * t / pair_total;
      double pmi = std::log(scaled * t / (unigram[i] * unigram[j]));
      out.values(i, j) = std::max(0.0, pmi);
    }
  }
  return out;
}

Eigenpairs factorize_symmetric(const Matrix& m, int k, std::uint64_t seed, int max_iterations, double tol) {
  require(m.rows == m.cols, ErrorCode::kInvalidInput, "matrix must be square");
  require(k >= 1 && static_cast<std::size_t>(k) <= m.rows, ErrorCode::kInvalidInput,
          "rank must be in [1, n]");
  const std::size_t n = m.rows;
  const std::size_t block = std::min(n, static_cast<std::size_t>(k) + 8);
  const auto kk = static_cast<std::size_t>(k);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Matrix q(n, block);
  for (double& x : q.data) x = uni(rng);
  orthonormalize(q, rng);

  Eigenpairs out;
  std::vector<double> previous;
  Matrix mq = multiply(m, q);
  for (int it = 1; it <= max_iterations; ++it) {
    q = std::move(mq);
    orthonormalize(q, rng);
    mq = multiply(m, q);
    out.iterations = it;

    Matrix h = projected(q, mq);
    Matrix v;
    jacobi_eigen(h, v);
    auto order = magnitude_order(h);
    std::vector<double> leading;
    for (std::size_t i = 0; i < kk; ++i) leading.push_back(h(order[i], order[i]));
    bool converged = !previous.empty();
    for (std::size_t i = 0; converged && i < kk; ++i) {
      double scale = std::max(std::abs(leading[i]), 1e-12);
      if (std::abs(leading[i] - previous[i]) / scale >= tol) converged = false;
    }
    previous = std::move(leading);
    if (converged) break;
  }

  Matrix h = projected(q, mq);
  Matrix v;
  jacobi_eigen(h, v);
  auto order = magnitude_order(h);
  out.vectors = Matrix(n, kk);
  out.values.resize(kk);
  for (std::size_t c = 0; c < kk; ++c) {
    std::size_t src = order[c];
    out.values[c] = h(src, src);
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < block; ++j) s += q(r, j) * v(j, src);
      out.vectors(r, c) = s;
    }
    // Canonical sign: largest-magnitude component positive.
    std::size_t arg = 0;
    for (std::size_t r = 1; r < n; ++r)
      if (std::abs(out.vectors(r, c)) > std::abs(out.vectors(arg, c))) arg = r;
    if (out.vectors(arg, c) < 0.0)
      for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = -out.vectors(r, c);
  }
  return out;
}

std::optional<std::size_t> EmbedderArtifact::index_of(std::string_view token) const {
  auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), token,
                             [](const Token& a, std::string_view b) { return a < b; });
  if (it == vocabulary.end() || *it != token) return std::nullopt;
  return static_cast<std::size_t>(it - vocabulary.begin());
}

EmbedderArtifact pretrain_embedder(const Corpus& corpus, int dim, int window, std::uint64_t seed) {
  require(dim >= 1, ErrorCode::kInvalidInput, "dim must be >= 1");
  require(window >= 1, ErrorCode::kInvalidInput, "window must be >= 1");
  require(corpus.total_tokens() >= 1, ErrorCode::kInvalidInput, "corpus is empty");
  PpmiMatrix m = ppmi(corpus, window);
  require(static_cast<std::size_t>(dim) <= m.vocabulary.size(), ErrorCode::kInvalidInput,
          "dim exceeds vocabulary size");

  Eigenpairs eig = factorize_symmetric(m.values, dim, seed);
  EmbedderArtifact a;
  a.vocabulary = std::move(m.vocabulary);
  a.dim = dim;
  a.window = window;
  a.seed = seed;
  a.matrix = Matrix(a.vocabulary.size(), static_cast<std::size_t>(dim));
  for (std::size_t c = 0; c < eig.values.size(); ++c) {
    double scale = std::sqrt(std::abs(eig.values[c]));
    for (std::size_t r = 0; r < a.matrix.rows; ++r) a.matrix(r, c) = eig.vectors(r, c) * scale;
  }
  return a;
}

std::vector<double> embed_document(const EmbedderArtifact& artifact, std::span<const Token> tokens) {
  const auto dim = static_cast<std::size_t>(artifact.dim);
  std::vector<double> out(dim, 0.0);
  // Count per vocabulary row first so that repeating a document yields
  // bit-identical weights and summation order.
  std::map<std::size_t, std::size_t> counts;
  std::size_t known = 0;
  for (const auto& tok : tokens) {
    if (auto idx = artifact.index_of(tok)) {
      ++counts[*idx];
      ++known;
    }
  }
  if (known == 0) return out;
  for (const auto& [idx, count] : counts) {
    double weight = static_cast<double>(count) / static_cast<double>(known);
    auto row = artifact.matrix.row(idx);
    for (std::size_t c = 0; c < dim; ++c) out[c] += weight * row[c];
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double logistic_loss(std::span<const double> weights, double bias, std::span<const std::vector<double>> features,
                     std::span<const int> labels, double l2) {
  require(features.size() == labels.size() && !features.empty(), ErrorCode::kInvalidInput,
          "features and labels must be nonempty and of equal length");
  double total = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    double z = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * features[i][j];
    // log(1 + e^z) - y z, stable for large |z|
    double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    total += softplus - labels[i] * z;
  }
  double penalty = 0.0;
  for (double w : weights) penalty += w * w;
  return total / static_cast<double>(features.size()) + l2 * penalty;
}

LogisticGradient logistic_gradient(std::span<const double> weights, double bias,
                                   std::span<const std::vector<double>> features, std::span<const int> labels,
                                   double l2) {
  require(features.size() == labels.size() && !features.empty(), ErrorCode::kInvalidInput,
          "features and labels must be nonempty and of equal length");
  LogisticGradient g;
  g.weights.assign(weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    double z = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * features[i][j];
    double r = sigmoid(z) - labels[i];
    for (std::size_t j = 0; j < weights.size(); ++j) g.weights[j] += r * features[i][j];
    g.bias += r;
  }
  for (std::size_t j = 0; j < weights.size(); ++j) g.weights[j] = g.weights[j] * inv_n + 2.0 * l2 * weights[j];
  g.bias *= inv_n;
  return g;
}

ClassifierArtifact fit_logistic(std::span<const std::vector<double>> features, std::span<const int> labels,
                                const TrainOptions& options, std::string parent) {
  require(!features.empty() && features.size() == labels.size(), ErrorCode::kInvalidInput,
          "features and labels must be nonempty and of equal length");
  validate_labels(labels);
  const std::size_t dim = features.front().size();
  for (const auto& f : features) {
    require(f.size() == dim, ErrorCode::kInvalidInput, "feature rows differ in dimension");
    for (double x : f) require(std::isfinite(x), ErrorCode::kInvalidInput, "non-finite feature");
  }
  ClassifierArtifact out;
  out.weights.assign(dim, 0.0);
  out.parent = std::move(parent);
  for (int it = 0; it < options.iterations; ++it) {
    auto g = logistic_gradient(out.weights, out.bias, features, labels, options.l2);
    for (std::size_t j = 0; j < dim; ++j) out.weights[j] -= options.learning_rate * g.weights[j];
    out.bias -= options.learning_rate * g.bias;
  }
  return out;
}

ClassifierArtifact finetune_classifier(const EmbedderArtifact& artifact, std::span<const LabeledExample> examples,
                                       const TrainOptions& options) {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  features.reserve(examples.size());
  for (const auto& ex : examples) {
    features.push_back(embed_document(artifact, ex.tokens));
    labels.push_back(ex.label);
  }
  require(!features.empty(), ErrorCode::kInvalidInput, "no training examples");
  return fit_logistic(features, labels, options, sha256_hex(serialize(artifact)));
}

double predict(const ClassifierArtifact& classifier, std::span<const double> features) {
  require(features.size() == classifier.weights.size(), ErrorCode::kInvalidInput,
          "feature dimension does not match classifier");
  double z = classifier.bias;
  for (std::size_t j = 0; j < features.size(); ++j) z += classifier.weights[j] * features[j];
  return sigmoid(z);
}

EvalMetrics evaluate_scores(std::span<const double> scores, std::span<const int> labels) {
  require(!scores.empty(), ErrorCode::kInvalidInput, "no evaluation examples");
  require(scores.size() == labels.size(), ErrorCode::kInvalidInput, "scores and labels differ in length");
  EvalMetrics m;
  m.sample_count = scores.size();
  std::size_t correct = 0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    int predicted = scores[i] >= 0.5 ? 1 : 0;
    if (predicted == labels[i]) ++correct;
    if (labels[i] == 1) ++positives;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(scores.size());

  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    m.auc = 0.5;
    return m;
  }
  // Mann-Whitney U from midranks.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) positive_rank_sum += midrank;
    i = j;
  }
  double p = static_cast<double>(positives);
  double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  m.auc = u / (p * static_cast<double>(negatives));
  return m;
}

EvalMetrics evaluate(const ClassifierArtifact& classifier, const EmbedderArtifact& embedder,
                     std::span<const LabeledExample> examples) {
  require(!examples.empty(), ErrorCode::kInvalidInput, "no evaluation examples");
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& ex : examples) {
    scores.push_back(predict(classifier, embed_document(embedder, ex.tokens)));
    labels.push_back(ex.label);
  }
  return evaluate_scores(scores, labels);
}

std::vector<std::uint8_t> serialize(const EmbedderArtifact& a) {
  ByteWriter w;
  w.put_raw(kEmbedderMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.window));
  w.put<std::uint64_t>(a.seed);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.vocabulary.size()));
  for (const auto& tok : a.vocabulary) w.put_string16(tok);
  for (double x : a.matrix.data) w.put<double>(x);
  return w.take();
}

std::vector<std::uint8_t> serialize(const ClassifierArtifact& a) {
  ByteWriter w;
  w.put_raw(kClassifierMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.weights.size()));
  w.put_string16(a.parent);
  w.put<double>(a.bias);
  for (double x : a.weights) w.put<double>(x);
  return w.take();
}

std::optional<ArtifactKind> artifact_kind(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) return std::nullopt;
  std::string_view magic(reinterpret_cast<const char*>(bytes.data()), 4);
  if (magic == kEmbedderMagic) return ArtifactKind::kEmbedder;
  if (magic == kClassifierMagic) return ArtifactKind::kClassifier;
  return std::nullopt;
}

EmbedderArtifact deserialize_embedder(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.get_raw(4) != kEmbedderMagic) fail(ErrorCode::kInvalidInput, "not an embedder artifact");
  EmbedderArtifact a;
  a.dim = static_cast<int>(r.get<std::uint32_t>());
  a.window = static_cast<int>(r.get<std::uint32_t>());
  a.seed = r.get<std::uint64_t>();
  auto n = r.get<std::uint32_t>();
  require(a.dim >= 1, ErrorCode::kIntegrityError, "embedder dim must be >= 1");
  a.vocabulary.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) a.vocabulary.push_back(r.get_string16());
  require(std::is_sorted(a.vocabulary.begin(), a.vocabulary.end()), ErrorCode::kIntegrityError,
          "embedder vocabulary not sorted");
  require(r.remaining() == static_cast<std::size_t>(n) * static_cast<std::size_t>(a.dim) * sizeof(double),
          ErrorCode::kIntegrityError, "embedder matrix size mismatch");
  a.matrix = Matrix(n, static_cast<std::size_t>(a.dim));
  for (double& x : a.matrix.data) {
    x = r.get<double>();
    require(std::isfinite(x), ErrorCode::kIntegrityError, "non-finite embedding entry");
  }
  return a;
}

ClassifierArtifact deserialize_classifier(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.get_raw(4) != kClassifierMagic) fail(ErrorCode::kInvalidInput, "not a classifier artifact");
  ClassifierArtifact a;
  auto dim = r.get<std::uint32_t>();
  a.parent = r.get_string16();
  a.bias = r.get<double>();
  require(r.remaining() == dim * sizeof(double), ErrorCode::kIntegrityError, "classifier size mismatch");
  a.weights.resize(dim);
  for (double& x : a.weights) x = r.get<double>();
  return a;
}

}  // namespace saturn::modelkit
