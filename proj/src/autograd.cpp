#include "diffplace/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace diffplace::ag {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const Mat>;
using MutMap = Eigen::Map<Mat>;

ConstMap cmap(std::span<const double> d, std::size_t r, std::size_t c) {
  return ConstMap(d.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MutMap mmap(std::span<double> d, std::size_t r, std::size_t c) {
  return MutMap(d.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

std::string shape_str(const Tensor& t) {
  std::ostringstream os;
  os << "[" << t.rows() << ", " << t.cols() << "]";
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    shape_error(op, "shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

void require_row(const char* op, const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    shape_error(op, "row operand " + shape_str(row) + " incompatible with " + shape_str(a));
  }
}

void require_index(const char* op, const Index& idx, std::size_t bound) {
  for (std::size_t k : idx) {
    if (k >= bound) shape_error(op, "index " + std::to_string(k) + " out of range " + std::to_string(bound));
  }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); }

}  // namespace

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->rows = rows;
  t.s_->cols = cols;
  t.s_->value.assign(rows * cols, 0.0);
  t.s_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
  if (values.size() != rows * cols) {
    throw ShapeError("Tensor::from: " + std::to_string(values.size()) + " values for shape [" +
                     std::to_string(rows) + ", " + std::to_string(cols) + "]");
  }
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->rows = rows;
  t.s_->cols = cols;
  t.s_->value = std::move(values);
  t.s_->requires_grad = requires_grad;
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor is not a scalar");
  return s_->value[0];
}

std::span<double> Tensor::grad() const {
  if (s_->grad.size() != s_->value.size()) s_->grad.assign(s_->value.size(), 0.0);
  return s_->grad;
}

void Tensor::zero_grad() const {
  if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), 0.0);
}

Tensor Tape::output(std::size_t rows, std::size_t cols, bool requires_grad) {
  return Tensor::zeros(rows, cols, requires_grad && enabled_);
}

void Tape::record(std::function<void()> fn) {
  if (!enabled_) return;
  if (consumed_) {
    records_.clear();
    consumed_ = false;
  }
  records_.push_back(std::move(fn));
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", shape_str(a) + " x " + shape_str(b));
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = output(a.rows(), b.cols(), rg);
  mmap(out.values(), a.rows(), b.cols()).noalias() =
      cmap(a.values(), a.rows(), a.cols()) * cmap(b.values(), b.rows(), b.cols());
  if (out.requires_grad()) {
    record([a, b, out]() mutable {
      const auto dc = cmap(out.grad(), out.rows(), out.cols());
      if (a.requires_grad()) {
        mmap(a.grad(), a.rows(), a.cols()).noalias() += dc * cmap(b.values(), b.rows(), b.cols()).transpose();
      }
      if (b.requires_grad()) {
        mmap(b.grad(), b.rows(), b.cols()).noalias() += cmap(a.values(), a.rows(), a.cols()).transpose() * dc;
      }
    });
  }
  return out;
}

Tensor Tape::matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", shape_str(a) + " x " + shape_str(b) + "^T");
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = output(a.rows(), b.rows(), rg);
  mmap(out.values(), a.rows(), b.rows()).noalias() =
      cmap(a.values(), a.rows(), a.cols()) * cmap(b.values(), b.rows(), b.cols()).transpose();
  if (out.requires_grad()) {
    record([a, b, out]() mutable {
      const auto dc = cmap(out.grad(), out.rows(), out.cols());
      if (a.requires_grad()) {
        mmap(a.grad(), a.rows(), a.cols()).noalias() += dc * cmap(b.values(), b.rows(), b.cols());
      }
      if (b.requires_grad()) {
        mmap(b.grad(), b.rows(), b.cols()).noalias() += dc.transpose() * cmap(a.values(), a.rows(), a.cols());
      }
    });
  }
  return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = output(a.rows(), a.cols(), rg);
  auto o = out.values();
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = av[k] + bv[k];
  if (out.requires_grad()) {
    record([a, b, out]() mutable {
      auto d = out.grad();
      if (a.requires_grad()) {
        auto g = a.grad();
        for (std::size_t k = 0; k < d.size(); ++k) g[k] += d[k];
      }
      if (b.requires_grad()) {
        auto g = b.grad();
        for (std::size_t k = 0; k < d.size(); ++k) g[k] += d[k];
      }
    });
  }
  return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = output(a.rows(), a.cols(), rg);
  auto o = out.values();
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = av[k] - bv[k];
  if (out.requires_grad()) {
    record([a, b, out]() mutable {
      auto d = out.grad();
      if (a.requires_grad()) {
        auto g = a.grad();
        for (std::size_t k = 0; k < d.size(); ++k) g[k] += d[k];
      }
      if (b.requires_grad()) {
        auto g = b.grad();
        for (std::size_t k = 0; k < d.size(); ++k) g[k] -= d[k];
      }
    });
  }
  return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = output(a.rows(), a.cols(), rg);
  auto o = out.values();
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = av[k] * bv[k];
  if (out.requires_grad()) {
    record([a, b, out]() mutable {
      auto d = out.grad();
      auto av = a.values();
      auto bv = b.values();
      if (a.requires_grad()) {
        auto g = a.grad();
        for (std::size_t k = 0; k < d.size(); ++k) g[k] += d[k] * bv[k];
      }
      if (b.requires_grad()) {
        auto g = b.grad();
        for (std::size_t k = 0; k < d.size(); ++k) g[k] += d[k] * av[k];
      }
    });
  }
  return out;
}

Tensor Tape::add_row(const Tensor& a, const Tensor& row) {
  require_row("add_row", a, row);
  const bool rg = a.requires_grad() || row.requires_grad();
  Tensor out = output(a.rows(), a.cols(), rg);
  const std::size_t n = a.rows(), m = a.cols();
  auto o = out.values();
  auto av = a.values();
  auto rv = row.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) o[i * m + j] = av[i * m + j] + rv[j];
  }
  if (out.requires_grad()) {
    record([a, row, out, n, m]() mutable {
      auto d = out.grad();
      if (a.requires_grad()) {
        auto g = a.grad();
        for (std::size_t k = 0; k < d.size(); ++k) g[k] += d[k];
      }
      if (row.requires_grad()) {
        auto g = row.grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) g[j] += d[i * m + j];
        }
      }
    });
  }
  return out;
}

Tensor Tape::mul_row(const Tensor& a, const Tensor& row) {
  require_row("mul_row", a, row);
  const bool rg = a.requires_grad() || row.requires_grad();
  Tensor out = output(a.rows(), a.cols(), rg);
  const std::size_t n = a.rows(), m = a.cols();
  auto o = out.values();
  auto av = a.values();
  auto rv = row.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) o[i * m + j] = av[i * m + j] * rv[j];
  }
  if (out.requires_grad()) {
    record([a, row, out, n, m]() mutable {
      auto d = out.grad();
      auto av = a.values();
      auto rv = row.values();
      if (a.requires_grad()) {
        auto g = a.grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) g[i * m + j] += d[i * m + j] * rv[j];
        }
      }
      if (row.requires_grad()) {
        auto g = row.grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) g[j] += d[i * m + j] * av[i * m + j];
        }
      }
    });
  }
  return out;
}

Tensor Tape::scale(const Tensor& a, double c) {
  Tensor out = output(a.rows(), a.cols(), a.requires_grad());
  auto o = out.values();
  auto av = a.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = c * av[k];
  if (out.requires_grad()) {
    record([a, out, c]() mutable {
      auto d = out.grad();
      auto g = a.grad();
      for (std::size_t k = 0; k < d.size(); ++k) g[k] += c * d[k];
    });
  }
  return out;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error("concat_cols", "no inputs");
  const std::size_t n = parts.front().rows();
  std::size_t m = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.rows() != n) shape_error("concat_cols", "row mismatch " + shape_str(parts.front()) + " vs " + shape_str(p));
    m += p.cols();
    rg = rg || p.requires_grad();
  }
  Tensor out = output(n, m, rg);
  auto o = out.values();
  std::size_t off = 0;
  for (const auto& p : parts) {
    auto pv = p.values();
    const std::size_t pc = p.cols();
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(pv.begin() + static_cast<long>(i * pc), pc, o.begin() + static_cast<long>(i * m + off));
    }
    off += pc;
  }
  if (out.requires_grad()) {
    record([parts, out, n, m]() mutable {
      auto d = out.grad();
      std::size_t off = 0;
      for (auto& p : parts) {
        const std::size_t pc = p.cols();
        if (p.requires_grad()) {
          auto g = p.grad();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < pc; ++j) g[i * pc + j] += d[i * m + off + j];
          }
        }
        off += pc;
      }
    });
  }
  return out;
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error("concat_rows", "no inputs");
  const std::size_t m = parts.front().cols();
  std::size_t n = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.cols() != m) shape_error("concat_rows", "column mismatch " + shape_str(parts.front()) + " vs " + shape_str(p));
    n += p.rows();
    rg = rg || p.requires_grad();
  }
  Tensor out = output(n, m, rg);
  auto o = out.values();
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), o.begin() + static_cast<long>(off));
    off += p.size();
  }
  if (out.requires_grad()) {
    record([parts, out]() mutable {
      auto d = out.grad();
      std::size_t off = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) {
          auto g = p.grad();
          for (std::size_t k = 0; k < g.size(); ++k) g[k] += d[off + k];
        }
        off += p.size();
      }
    });
  }
  return out;
}

Tensor Tape::slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  if (start + count > a.cols()) shape_error("slice_cols", "range exceeds " + shape_str(a));
  const std::size_t n = a.rows(), m = a.cols();
  Tensor out = output(n, count, a.requires_grad());
  auto o = out.values();
  auto av = a.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < count; ++j) o[i * count + j] = av[i * m + start + j];
  }
  if (out.requires_grad()) {
    record([a, out, n, m, start, count]() mutable {
      auto d = out.grad();
      auto g = a.grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < count; ++j) g[i * m + start + j] += d[i * count + j];
      }
    });
  }
  return out;
}

Tensor Tape::slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  if (start + count > a.rows()) shape_error("slice_rows", "range exceeds " + shape_str(a));
  const std::size_t m = a.cols();
  Tensor out = output(count, m, a.requires_grad());
  std::copy_n(a.values().begin() + static_cast<long>(start * m), count * m, out.values().begin());
  if (out.requires_grad()) {
    record([a, out, start, m]() mutable {
      auto d = out.grad();
      auto g = a.grad();
      for (std::size_t k = 0; k < d.size(); ++k) g[start * m + k] += d[k];
    });
  }
  return out;
}

Tensor Tape::gelu(const Tensor& a) {
  Tensor out = output(a.rows(), a.cols(), a.requires_grad());
  auto o = out.values();
  auto av = a.values();
  std::vector<double> cdf(out.requires_grad() ? o.size() : 0);
  for (std::size_t k = 0; k < o.size(); ++k) {
    const double c = normal_cdf(av[k]);
    if (!cdf.empty()) cdf[k] = c;
    o[k] = av[k] * c;
  }
  if (out.requires_grad()) {
    record([a, out, cdf = std::move(cdf)]() mutable {
      auto d = out.grad();
      auto g = a.grad();
      auto av = a.values();
      for (std::size_t k = 0; k < d.size(); ++k) {
        const double x = av[k];
        g[k] += d[k] * (cdf[k] + x * normal_pdf(x));
      }
    });
  }
  return out;
}

Tensor Tape::leaky_relu(const Tensor& a, double slope) {
  Tensor out = output(a.rows(), a.cols(), a.requires_grad());
  auto o = out.values();
  auto av = a.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = av[k] >= 0 ? av[k] : slope * av[k];
  if (out.requires_grad()) {
    record([a, out, slope]() mutable {
      auto d = out.grad();
      auto g = a.grad();
      auto av = a.values();
      for (std::size_t k = 0; k < d.size(); ++k) g[k] += av[k] >= 0 ? d[k] : slope * d[k];
    });
  }
  return out;
}

Tensor Tape::layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  require_row("layer_norm", a, gain);
  require_row("layer_norm", a, bias);
  const std::size_t n = a.rows(), m = a.cols();
  const bool rg = a.requires_grad() || gain.requires_grad() || bias.requires_grad();
  Tensor out = output(n, m, rg);
  std::vector<double> xhat(n * m);
  std::vector<double> inv_std(n);
  auto av = a.values();
  auto gv = gain.values();
  auto bv = bias.values();
  auto o = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < m; ++j) mu += av[i * m + j];
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) var += (av[i * m + j] - mu) * (av[i * m + j] - mu);
    var /= static_cast<double>(m);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      xhat[i * m + j] = (av[i * m + j] - mu) * inv_std[i];
      o[i * m + j] = gv[j] * xhat[i * m + j] + bv[j];
    }
  }
  if (out.requires_grad()) {
    record([a, gain, bias, out, n, m, xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
      auto d = out.grad();
      auto gv = gain.values();
      if (gain.requires_grad()) {
        auto g = gain.grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) g[j] += d[i * m + j] * xhat[i * m + j];
        }
      }
      if (bias.requires_grad()) {
        auto g = bias.grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) g[j] += d[i * m + j];
        }
      }
      if (a.requires_grad()) {
        auto g = a.grad();
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < n; ++i) {
          double mean_dx = 0.0, mean_dx_xhat = 0.0;
          for (std::size_t j = 0; j < m; ++j) {
            const double dx = d[i * m + j] * gv[j];
            mean_dx += dx;
            mean_dx_xhat += dx * xhat[i * m + j];
          }
          mean_dx *= inv_m;
          mean_dx_xhat *= inv_m;
          for (std::size_t j = 0; j < m; ++j) {
            const double dx = d[i * m + j] * gv[j];
            g[i * m + j] += inv_std[i] * (dx - mean_dx - xhat[i * m + j] * mean_dx_xhat);
          }
        }
      }
    });
  }
  return out;
}

Tensor Tape::softmax_rows(const Tensor& a) {
  const std::size_t n = a.rows(), m = a.cols();
  Tensor out = output(n, m, a.requires_grad());
  auto av = a.values();
  auto o = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, av[i * m + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += (o[i * m + j] = std::exp(av[i * m + j] - mx));
    for (std::size_t j = 0; j < m; ++j) o[i * m + j] /= z;
  }
  if (out.requires_grad()) {
    record([a, out, n, m]() mutable {
      auto d = out.grad();
      auto p = out.values();
      auto g = a.grad();
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < m; ++j) dot += d[i * m + j] * p[i * m + j];
        for (std::size_t j = 0; j < m; ++j) g[i * m + j] += p[i * m + j] * (d[i * m + j] - dot);
      }
    });
  }
  return out;
}

Tensor Tape::gather_rows(const Tensor& a, const Index& index) {
  require_index("gather_rows", index, a.rows());
  const std::size_t m = a.cols();
  Tensor out = output(index.size(), m, a.requires_grad());
  auto av = a.values();
  auto o = out.values();
  for (std::size_t r = 0; r < index.size(); ++r) {
    std::copy_n(av.begin() + static_cast<long>(index[r] * m), m, o.begin() + static_cast<long>(r * m));
  }
  if (out.requires_grad()) {
    record([a, out, index, m]() mutable {
      auto d = out.grad();
      auto g = a.grad();
      for (std::size_t r = 0; r < index.size(); ++r) {
        for (std::size_t j = 0; j < m; ++j) g[index[r] * m + j] += d[r * m + j];
      }
    });
  }
  return out;
}

Tensor Tape::segment_sum(const Tensor& a, const Index& segment, std::size_t num_segments) {
  if (segment.size() != a.rows()) shape_error("segment_sum", "segment vector length != rows of " + shape_str(a));
  require_index("segment_sum", segment, num_segments);
  const std::size_t m = a.cols();
  Tensor out = output(num_segments, m, a.requires_grad());
  auto av = a.values();
  auto o = out.values();
  for (std::size_t r = 0; r < segment.size(); ++r) {
    for (std::size_t j = 0; j < m; ++j) o[segment[r] * m + j] += av[r * m + j];
  }
  if (out.requires_grad()) {
    record([a, out, segment, m]() mutable {
      auto d = out.grad();
      auto g = a.grad();
      for (std::size_t r = 0; r < segment.size(); ++r) {
        for (std::size_t j = 0; j < m; ++j) g[r * m + j] += d[segment[r] * m + j];
      }
    });
  }
  return out;
}

Tensor Tape::segment_max(const Tensor& a, const Index& segment, std::size_t num_segments) {
  if (segment.size() != a.rows()) shape_error("segment_max", "segment vector length != rows of " + shape_str(a));
  require_index("segment_max", segment, num_segments);
  const std::size_t m = a.cols();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> arg(num_segments * m, kNone);
  auto av = a.values();
  for (std::size_t r = 0; r < segment.size(); ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      auto& best = arg[segment[r] * m + j];
      if (best == kNone || av[r * m + j] > av[best * m + j]) best = r;
    }
  }
  Tensor out = output(num_segments, m, a.requires_grad());
  auto o = out.values();
  for (std::size_t k = 0; k < arg.size(); ++k) o[k] = arg[k] == kNone ? 0.0 : av[arg[k] * m + k % m];
  if (out.requires_grad()) {
    record([a, out, arg = std::move(arg), m]() mutable {
      auto d = out.grad();
      auto g = a.grad();
      for (std::size_t k = 0; k < arg.size(); ++k) {
        if (arg[k] != kNone) g[arg[k] * m + k % m] += d[k];
      }
    });
  }
  return out;
}

Tensor Tape::segment_softmax(const Tensor& a, const Index& segment, std::size_t num_segments) {
  if (segment.size() != a.rows()) shape_error("segment_softmax", "segment vector length != rows of " + shape_str(a));
  require_index("segment_softmax", segment, num_segments);
  const std::size_t m = a.cols();
  auto av = a.values();
  std::vector<double> mx(num_segments * m, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < segment.size(); ++r) {
    for (std::size_t j = 0; j < m; ++j) mx[segment[r] * m + j] = std::max(mx[segment[r] * m + j], av[r * m + j]);
  }
  std::vector<double> z(num_segments * m, 0.0);
  Tensor out = output(a.rows(), m, a.requires_grad());
  auto o = out.values();
  for (std::size_t r = 0; r < segment.size(); ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      o[r * m + j] = std::exp(av[r * m + j] - mx[segment[r] * m + j]);
      z[segment[r] * m + j] += o[r * m + j];
    }
  }
  for (std::size_t r = 0; r < segment.size(); ++r) {
    for (std::size_t j = 0; j < m; ++j) o[r * m + j] /= z[segment[r] * m + j];
  }
  if (out.requires_grad()) {
    record([a, out, segment, num_segments, m]() mutable {
      auto d = out.grad();
      auto p = out.values();
      auto g = a.grad();
      std::vector<double> dot(num_segments * m, 0.0);
      for (std::size_t r = 0; r < segment.size(); ++r) {
        for (std::size_t j = 0; j < m; ++j) dot[segment[r] * m + j] += d[r * m + j] * p[r * m + j];
      }
      for (std::size_t r = 0; r < segment.size(); ++r) {
        for (std::size_t j = 0; j < m; ++j) {
          g[r * m + j] += p[r * m + j] * (d[r * m + j] - dot[segment[r] * m + j]);
        }
      }
    });
  }
  return out;
}

Tensor Tape::group_sum_cols(const Tensor& a, std::size_t groups) {
  if (groups == 0 || a.cols() % groups != 0) {
    shape_error("group_sum_cols", std::to_string(groups) + " groups do not divide " + shape_str(a));
  }
  const std::size_t n = a.rows(), m = a.cols(), c = m / groups;
  Tensor out = output(n, groups, a.requires_grad());
  auto av = a.values();
  auto o = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t g = 0; g < groups; ++g) {
      double s = 0.0;
      for (std::size_t k = 0; k < c; ++k) s += av[i * m + g * c + k];
      o[i * groups + g] = s;
    }
  }
  if (out.requires_grad()) {
    record([a, out, n, m, c, groups]() mutable {
      auto d = out.grad();
      auto gr = a.grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t g = 0; g < groups; ++g) {
          for (std::size_t k = 0; k < c; ++k) gr[i * m + g * c + k] += d[i * groups + g];
        }
      }
    });
  }
  return out;
}

Tensor Tape::mul_groups(const Tensor& weights, const Tensor& a) {
  if (weights.rows() != a.rows() || weights.cols() == 0 || a.cols() % weights.cols() != 0) {
    shape_error("mul_groups", "weights " + shape_str(weights) + " incompatible with " + shape_str(a));
  }
  const std::size_t n = a.rows(), m = a.cols(), groups = weights.cols(), c = m / groups;
  const bool rg = a.requires_grad() || weights.requires_grad();
  Tensor out = output(n, m, rg);
  auto wv = weights.values();
  auto av = a.values();
  auto o = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t g = 0; g < groups; ++g) {
      const double w = wv[i * groups + g];
      for (std::size_t k = 0; k < c; ++k) o[i * m + g * c + k] = w * av[i * m + g * c + k];
    }
  }
  if (out.requires_grad()) {
    record([weights, a, out, n, m, groups, c]() mutable {
      auto d = out.grad();
      auto wv = weights.values();
      auto av = a.values();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t g = 0; g < groups; ++g) {
            for (std::size_t k = 0; k < c; ++k) ga[i * m + g * c + k] += wv[i * groups + g] * d[i * m + g * c + k];
          }
        }
      }
      if (weights.requires_grad()) {
        auto gw = weights.grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t g = 0; g < groups; ++g) {
            double s = 0.0;
            for (std::size_t k = 0; k < c; ++k) s += av[i * m + g * c + k] * d[i * m + g * c + k];
            gw[i * groups + g] += s;
          }
        }
      }
    });
  }
  return out;
}

Tensor Tape::sum(const Tensor& a) {
  Tensor out = output(1, 1, a.requires_grad());
  double s = 0.0;
  for (double v : a.values()) s += v;
  out.values()[0] = s;
  if (out.requires_grad()) {
    record([a, out]() mutable {
      const double d = out.grad()[0];
      for (auto& g : a.grad()) g += d;
    });
  }
  return out;
}

Tensor Tape::mean(const Tensor& a) {
  if (a.size() == 0) shape_error("mean", "empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor Tape::mse(const Tensor& a, const Tensor& b) {
  require_same("mse", a, b);
  if (a.size() == 0) shape_error("mse", "empty tensor");
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = output(1, 1, rg);
  auto av = a.values();
  auto bv = b.values();
  double s = 0.0;
  for (std::size_t k = 0; k < av.size(); ++k) s += (av[k] - bv[k]) * (av[k] - bv[k]);
  const double inv = 1.0 / static_cast<double>(av.size());
  out.values()[0] = s * inv;
  if (out.requires_grad()) {
    record([a, b, out, inv]() mutable {
      const double d = out.grad()[0];
      auto av = a.values();
      auto bv = b.values();
      if (a.requires_grad()) {
        auto g = a.grad();
        for (std::size_t k = 0; k < av.size(); ++k) g[k] += 2 * inv * d * (av[k] - bv[k]);
      }
      if (b.requires_grad()) {
        auto g = b.grad();
        for (std::size_t k = 0; k < av.size(); ++k) g[k] -= 2 * inv * d * (av[k] - bv[k]);
      }
    });
  }
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw TapeError("backward: tape already consumed; run a new forward pass first");
  if (!loss.defined() || loss.size() != 1) throw TapeError("backward: loss must be a scalar tensor");
  if (!loss.requires_grad() || records_.empty()) {
    throw TapeError("backward: loss is not connected to any recorded operation");
  }
  Tensor l = loss;
  l.grad()[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  records_.clear();
  consumed_ = true;
}

void adam_update(std::span<double> value, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::int64_t step, double lr, double beta1, double beta2,
                 double eps) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t k = 0; k < value.size(); ++k) {
    const double g = grad.empty() ? 0.0 : grad[k];
    m[k] = beta1 * m[k] + (1 - beta1) * g;
    v[k] = beta2 * v[k] + (1 - beta2) * g * g;
    value[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
  }
  ++state.step;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (state.m[p].size() != params[p].size()) {
      state.m[p].assign(params[p].size(), 0.0);
      state.v[p].assign(params[p].size(), 0.0);
    }
    adam_update(params[p].values(), params[p].grad(), state.m[p], state.v[p], state.step, state.lr,
                state.beta1, state.beta2, state.eps);
  }
}

}  // namespace diffplace::ag
