#include "rrnet/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace rrnet {

namespace {

// Tag for the stream that resolves exact-zero ties in the convenience forward().
constexpr std::uint64_t kTieStreamTag = 0x7469657300000000ULL;

Architecture arch_from_weights(const std::vector<Matrix>& weights) {
  if (weights.empty()) throw DomainError("network needs at least one weight matrix");
  Architecture arch;
  arch.input_dim = static_cast<std::size_t>(weights.front().cols());
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    arch.hidden_widths.push_back(static_cast<std::size_t>(weights[i].rows()));
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const std::size_t expected_cols = arch.width(i);
    const std::size_t expected_rows = arch.width(i + 1);
    if (static_cast<std::size_t>(weights[i].cols()) != expected_cols ||
        static_cast<std::size_t>(weights[i].rows()) != expected_rows) {
      throw DomainError("weight " + std::to_string(i + 1) + " has shape " +
                        std::to_string(weights[i].rows()) + "x" +
                        std::to_string(weights[i].cols()) + ", expected " +
                        std::to_string(expected_rows) + "x" + std::to_string(expected_cols));
    }
  }
  arch.validate();
  return arch;
}

Mask activation_mask(const Vector& pre, TiePolicy policy, RngStream* rng) {
  Mask mask(pre.size());
  for (Eigen::Index j = 0; j < pre.size(); ++j) {
    const double v = pre[j];
    if (v > 0.0) {
      mask[j] = 1;
    } else if (v < 0.0) {
      mask[j] = 0;
    } else {
      switch (policy) {
        case TiePolicy::RandomizedTies:
          mask[j] = rng->bernoulli(0.5) ? 1 : 0;
          break;
        case TiePolicy::TiesToOne:
          mask[j] = 1;
          break;
        case TiePolicy::TiesToZero:
          mask[j] = 0;
          break;
      }
    }
  }
  return mask;
}

// row <- (row .* mask) * W, i.e. multiplication by D W from the right.
Eigen::RowVectorXd masked_pullback(const Eigen::RowVectorXd& row, const Mask& mask,
                                   const Matrix& w) {
  return (row.array() * mask.cast<double>().transpose()).matrix() * w;
}

}  // namespace

std::size_t Architecture::width(std::size_t i) const {
  if (i == 0) return input_dim;
  if (i <= hidden_widths.size()) return hidden_widths[i - 1];
  if (i == hidden_widths.size() + 1) return 1;
  throw DomainError("layer index " + std::to_string(i) + " out of range");
}

std::size_t Architecture::min_width() const {
  std::size_t m = input_dim;
  for (auto w : hidden_widths) m = std::min(m, w);
  return m;
}

std::size_t Architecture::max_width() const {
  std::size_t m = input_dim;
  for (auto w : hidden_widths) m = std::max(m, w);
  return m;
}

void Architecture::validate() const {
  if (input_dim == 0) throw DomainError("input dimension must be at least 1");
  for (std::size_t i = 0; i < hidden_widths.size(); ++i) {
    if (hidden_widths[i] == 0) {
      throw DomainError("hidden width " + std::to_string(i + 1) + " must be at least 1");
    }
  }
}

double init_std(InitMode mode, std::size_t fan_in) {
  const double n = static_cast<double>(fan_in);
  return mode == InitMode::Standard ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
}

Network::Network(Architecture arch, InitMode mode, TiePolicy ties, std::uint64_t seed,
                 std::vector<Matrix> weights)
    : arch_(std::move(arch)), mode_(mode), ties_(ties), seed_(seed), weights_(std::move(weights)) {}

Network Network::sample(const Architecture& arch, InitMode mode, RngStream& rng, TiePolicy ties) {
  arch.validate();
  std::vector<Matrix> weights;
  weights.reserve(arch.depth() + 1);
  for (std::size_t i = 1; i <= arch.depth() + 1; ++i) {
    const std::size_t fan_in = arch.width(i - 1);
    weights.push_back(gaussian_matrix(arch.width(i), fan_in, init_std(mode, fan_in), rng));
  }
  return Network(arch, mode, ties, rng.master_seed(), std::move(weights));
}

Network Network::from_weights(std::vector<Matrix> weights, InitMode mode, TiePolicy ties,
                              std::uint64_t seed) {
  Architecture arch = arch_from_weights(weights);
  return Network(std::move(arch), mode, ties, seed, std::move(weights));
}

bool operator==(const Network& a, const Network& b) {
  if (a.arch_ != b.arch_ || a.mode_ != b.mode_ || a.ties_ != b.ties_ || a.seed_ != b.seed_) {
    return false;
  }
  for (std::size_t i = 0; i < a.weights_.size(); ++i) {
    if (a.weights_[i] != b.weights_[i]) return false;
  }
  return true;
}

ForwardTrace forward(const Network& net, const Vector& x, TiePolicy policy, RngStream& rng) {
  if (static_cast<std::size_t>(x.size()) != net.arch().input_dim) {
    throw DomainError("input has dimension " + std::to_string(x.size()) + ", network expects " +
                      std::to_string(net.arch().input_dim));
  }
  ForwardTrace trace;
  trace.input = x;
  const std::size_t ell = net.depth();
  trace.pre.reserve(ell);
  trace.masks.reserve(ell);
  trace.post.reserve(ell);
  for (std::size_t i = 1; i <= ell; ++i) {
    Vector pre = net.layer(i) * trace.image(i - 1);
    Mask mask = activation_mask(pre, policy, &rng);
    Vector post = (mask != 0).select(pre, Vector::Zero(pre.size()));
    trace.pre.push_back(std::move(pre));
    trace.masks.push_back(std::move(mask));
    trace.post.push_back(std::move(post));
  }
  trace.output = net.layer(ell + 1).row(0).dot(trace.image(ell));
  return trace;
}

ForwardTrace forward(const Network& net, const Vector& x) {
  RngStream rng(derive_seed(net.seed(), kTieStreamTag), 0);
  return forward(net, x, net.tie_policy(), rng);
}

double evaluate(const Network& net, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != net.arch().input_dim) {
    throw DomainError("input has dimension " + std::to_string(x.size()) + ", network expects " +
                      std::to_string(net.arch().input_dim));
  }
  Vector h = x;
  for (std::size_t i = 1; i <= net.depth(); ++i) {
    h = (net.layer(i) * h).cwiseMax(0.0);
  }
  return net.layer(net.depth() + 1).row(0).dot(h);
}

Vector gradient(const Network& net, const ForwardTrace& trace) {
  const std::size_t ell = net.depth();
  Eigen::RowVectorXd g = net.layer(ell + 1).row(0);
  for (std::size_t i = ell; i >= 1; --i) {
    g = masked_pullback(g, trace.masks[i - 1], net.layer(i));
  }
  return g.transpose();
}

Vector GradDecomposition::sum() const {
  Vector s = Vector::Zero(grad_x.size());
  for (const auto& t : terms) s += t;
  return s;
}

GradDecomposition grad_difference_decomposition(const Network& net, const ForwardTrace& trace_x,
                                                const ForwardTrace& trace_y) {
  const std::size_t ell = net.depth();
  GradDecomposition out;
  out.grad_x = gradient(net, trace_x);
  out.grad_y = gradient(net, trace_y);
  out.terms.assign(ell, Vector::Zero(static_cast<Eigen::Index>(net.arch().input_dim)));

  // upper = W_{ell+1} prod_{i=ell}^{j+1} D_i(x) W_i, walked from the top down.
  Eigen::RowVectorXd upper = net.layer(ell + 1).row(0);
  for (std::size_t j = ell; j >= 1; --j) {
    const Mask& mx = trace_x.masks[j - 1];
    const Mask& my = trace_y.masks[j - 1];
    if ((mx != my).any()) {
      const Eigen::ArrayXd diff = mx.cast<double>() - my.cast<double>();
      Eigen::RowVectorXd term = (upper.array() * diff.transpose()).matrix() * net.layer(j);
      for (std::size_t i = j - 1; i >= 1; --i) {
        term = masked_pullback(term, trace_y.masks[i - 1], net.layer(i));
      }
      out.terms[j - 1] = term.transpose();
    }
    upper = masked_pullback(upper, mx, net.layer(j));
  }
  return out;
}

BottleneckDecomposition bottleneck_decomposition(const Architecture& arch) {
  arch.validate();
  BottleneckDecomposition out;
  std::size_t end = arch.depth() + 1;  // search indices [0, end)
  while (true) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < end; ++i) {
      if (arch.width(i) < arch.width(best)) best = i;  // strict: ties stay at the smaller index
    }
    out.indices.push_back(best);
    out.widths.push_back(arch.width(best));
    if (best == 0) break;
    end = best;
  }
  return out;
}

double paper_radius(double d_min, double d_max, std::size_t ell) {
  if (!(d_min > 0.0) || !(d_max > 0.0)) throw DomainError("paper_radius: widths must be positive");
  const double base = static_cast<double>(ell) * std::log(d_max);
  if (!(base >= 1.0)) {
    throw DomainError("paper_radius: ell * ln(d_max) = " + std::to_string(base) +
                      " is below 1, formula not meaningful");
  }
  return std::sqrt(d_min) / std::pow(base, 80.0 * static_cast<double>(ell));
}

double paper_radius(const Architecture& arch) {
  arch.validate();
  return paper_radius(static_cast<double>(arch.min_width()),
                      static_cast<double>(arch.max_width()), arch.depth());
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[4] = {'R', 'R', 'N', 'N'};

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) buf_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  const std::vector<unsigned char>& data() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> buf) : buf_(std::move(buf)) {}

  void need(std::size_t n, const char* what) const {
    if (buf_.size() - pos_ < n) {
      throw FormatError(std::string("truncated network file while reading ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return buf_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * k);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * k);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_network(const Network& net, const std::filesystem::path& path) {
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(kNetworkFileVersion);
  w.u8(static_cast<std::uint8_t>(net.mode()));
  w.u8(static_cast<std::uint8_t>(net.tie_policy()));
  w.u32(static_cast<std::uint32_t>(net.depth()));
  for (std::size_t i = 0; i <= net.depth() + 1; ++i) {
    w.u32(static_cast<std::uint32_t>(net.arch().width(i)));
  }
  for (const auto& m : net.weights()) {
    for (Eigen::Index k = 0; k < m.size(); ++k) w.f64(m.data()[k]);
  }
  w.u64(net.seed());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto& data = w.data();
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read from '" + path.string() + "' failed");

  ByteReader r(std::move(buf));
  r.need(4, "magic");
  for (char c : kMagic) {
    if (r.u8("magic") != static_cast<unsigned char>(c)) throw FormatError("bad magic, not an RRNN file");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kNetworkFileVersion) {
    throw FormatError("unsupported network file version " + std::to_string(version) +
                      " (expected " + std::to_string(kNetworkFileVersion) + ")");
  }
  const std::uint8_t mode = r.u8("mode");
  if (mode > 1) throw FormatError("unknown init mode byte " + std::to_string(mode));
  const std::uint8_t ties = r.u8("tie policy");
  if (ties > 2) throw FormatError("unknown tie policy byte " + std::to_string(ties));
  const std::uint32_t ell = r.u32("depth");
  // Every layer needs at least 4 bytes of dimension plus 8 of weight.
  if (static_cast<std::uint64_t>(ell) + 2 > r.remaining() / 4) {
    throw FormatError("truncated network file while reading dimensions");
  }

  std::vector<std::size_t> dims(ell + 2);
  for (auto& d : dims) {
    d = r.u32("dimensions");
    if (d == 0) throw FormatError("zero layer width");
  }
  if (dims.back() != 1) throw FormatError("output width must be 1, found " + std::to_string(dims.back()));

  std::vector<Matrix> weights;
  weights.reserve(ell + 1);
  for (std::size_t i = 1; i <= ell + 1; ++i) {
    const std::uint64_t count = static_cast<std::uint64_t>(dims[i]) * dims[i - 1];
    if (count > r.remaining() / 8) throw FormatError("truncated network file while reading weights");
    Matrix m(static_cast<Eigen::Index>(dims[i]), static_cast<Eigen::Index>(dims[i - 1]));
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double v = r.f64("weights");
      if (!std::isfinite(v)) throw FormatError("non-finite weight in layer " + std::to_string(i));
      m.data()[k] = v;
    }
    weights.push_back(std::move(m));
  }
  const std::uint64_t seed = r.u64("seed");
  if (r.remaining() != 0) throw FormatError("trailing bytes after network payload");

  return Network::from_weights(std::move(weights), static_cast<InitMode>(mode),
                               static_cast<TiePolicy>(ties), seed);
}

}  // namespace rrnet
