#include "lensless/tv_solver.hpp"

#include "lensless/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace lensless {

std::string to_string(TvVariant tv) { return tv == TvVariant::Anisotropic ? "anisotropic" : "isotropic"; }

std::string to_string(Fidelity fidelity) {
  return fidelity == Fidelity::Constrained ? "constrained" : "penalized";
}

TvVariant tv_variant_from_string(const std::string& name) {
  if (name == "anisotropic") return TvVariant::Anisotropic;
  if (name == "isotropic") return TvVariant::Isotropic;
  throw FormatError("unknown TV variant '" + name + "'");
}

Fidelity fidelity_from_string(const std::string& name) {
  if (name == "constrained") return Fidelity::Constrained;
  if (name == "penalized") return Fidelity::Penalized;
  throw FormatError("unknown fidelity mode '" + name + "'");
}

void SolverConfig::validate() const {
  if (!(mu > 0.0) || !(sigma > 0.0) || !(tolerance > 0.0) || !(beta > 0.0) || !(gamma > 0.0)) {
    throw std::invalid_argument("solver weights, penalties and tolerance must be positive");
  }
  if (max_iterations < 1 || cg_iterations < 1) {
    throw std::invalid_argument("solver iteration limits must be at least 1");
  }
}

namespace {

// Masked forward-difference gradient over the unknowns of all blocks. Each
// unknown p owns two gradient slots: (right neighbour - p) and
// (lower neighbour - p), zero when the neighbour is missing.
class Gradient {
 public:
  Gradient(const std::vector<ImageBlock>& blocks, const std::vector<std::vector<Index>>& unknown_of_pixel,
           const std::vector<Index>& block_of_unknown)
      : right_(block_of_unknown.size(), -1), down_(block_of_unknown.size(), -1) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& blk = blocks[b];
      const auto& idx = unknown_of_pixel[b];
      for (Index j = 0; j < blk.cols; ++j) {
        for (Index i = 0; i < blk.rows; ++i) {
          const Index p = idx[static_cast<std::size_t>(j * blk.rows + i)];
          if (p < 0) continue;
          if (j + 1 < blk.cols) right_[p] = idx[static_cast<std::size_t>((j + 1) * blk.rows + i)];
          if (i + 1 < blk.rows) down_[p] = idx[static_cast<std::size_t>(j * blk.rows + i + 1)];
        }
      }
    }
  }

  Index size() const { return static_cast<Index>(right_.size()); }

  // Output layout: [horizontal differences; vertical differences].
  Vector apply(const Vector& x) const {
    const Index n = size();
    Vector g = Vector::Zero(2 * n);
    for (Index p = 0; p < n; ++p) {
      if (right_[p] >= 0) g(p) = x(right_[p]) - x(p);
      if (down_[p] >= 0) g(n + p) = x(down_[p]) - x(p);
    }
    return g;
  }

  Vector adjoint(const Vector& g) const {
    const Index n = size();
    Vector x = Vector::Zero(n);
    for (Index p = 0; p < n; ++p) {
      if (right_[p] >= 0) {
        x(right_[p]) += g(p);
        x(p) -= g(p);
      }
      if (down_[p] >= 0) {
        x(down_[p]) += g(n + p);
        x(p) -= g(n + p);
      }
    }
    return x;
  }

 private:
  std::vector<Index> right_;
  std::vector<Index> down_;
};

double tv_of_gradient(const Vector& g, const Vector& weight, TvVariant tv) {
  const Index n = weight.size();
  if (tv == TvVariant::Anisotropic) {
    return (weight.array() * (g.head(n).array().abs() + g.tail(n).array().abs())).sum();
  }
  return (weight.array() * (g.head(n).array().square() + g.tail(n).array().square()).sqrt()).sum();
}

// prox of sum_p t_p |g_p| (anisotropic) or t_p |(gx_p, gy_p)| (isotropic).
Vector shrink(const Vector& g, const Vector& threshold, TvVariant tv) {
  const Index n = threshold.size();
  Vector out(2 * n);
  if (tv == TvVariant::Anisotropic) {
    for (Index p = 0; p < n; ++p) {
      for (const Index k : {p, n + p}) {
        const double a = std::abs(g(k)) - threshold(p);
        out(k) = a > 0.0 ? std::copysign(a, g(k)) : 0.0;
      }
    }
    return out;
  }
  for (Index p = 0; p < n; ++p) {
    const double mag = std::hypot(g(p), g(n + p));
    const double s = mag > threshold(p) ? (mag - threshold(p)) / mag : 0.0;
    out(p) = s * g(p);
    out(n + p) = s * g(n + p);
  }
  return out;
}

}  // namespace

double total_variation(const Image& image, TvVariant tv, const Mask& support) {
  const Index rows = image.rows();
  const Index cols = image.cols();
  const auto in = [&](Index i, Index j) { return support.size() == 0 || support(i, j); };
  double sum = 0.0;
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      if (!in(i, j)) continue;
      const double dx = (j + 1 < cols && in(i, j + 1)) ? image(i, j + 1) - image(i, j) : 0.0;
      const double dy = (i + 1 < rows && in(i + 1, j)) ? image(i + 1, j) - image(i, j) : 0.0;
      sum += tv == TvVariant::Anisotropic ? std::abs(dx) + std::abs(dy) : std::hypot(dx, dy);
    }
  }
  return sum;
}

ReconResult solve_tv(const LinearOperator& op, const Vector& z, const std::vector<ImageBlock>& blocks,
                     const SolverConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  if (blocks.empty()) throw std::invalid_argument("reconstruction needs at least one image block");
  Index full_size = 0;
  for (const auto& b : blocks) {
    if (b.rows < 1 || b.cols < 1) throw DimensionError("image block must be non-empty");
    if (b.support.size() != 0 && (b.support.rows() != b.rows || b.support.cols() != b.cols)) {
      throw DimensionError("support mask does not match its image block");
    }
    if (!(b.tv_weight >= 0.0)) throw std::invalid_argument("TV weight must be non-negative");
    full_size += b.rows * b.cols;
  }
  if (op.cols() != full_size) {
    throw DimensionError("operator takes " + std::to_string(op.cols()) + " pixels but the image blocks hold " +
                         std::to_string(full_size));
  }
  if (z.size() != op.rows()) {
    throw DimensionError("operator produces " + std::to_string(op.rows()) + " measurements, got " +
                         std::to_string(z.size()));
  }
  if (!z.allFinite()) throw std::invalid_argument("measurements contain non-finite values");

  // Unknowns: supported pixels of every block, in block then scan order.
  std::vector<std::vector<Index>> unknown_of_pixel(blocks.size());
  std::vector<Index> full_of_unknown;
  std::vector<Index> block_of_unknown;
  Index offset = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    unknown_of_pixel[b].assign(static_cast<std::size_t>(blk.rows * blk.cols), -1);
    for (Index p = 0; p < blk.rows * blk.cols; ++p) {
      if (blk.support.size() != 0 && !blk.support.reshaped()(p)) continue;
      unknown_of_pixel[b][static_cast<std::size_t>(p)] = static_cast<Index>(full_of_unknown.size());
      full_of_unknown.push_back(offset + p);
      block_of_unknown.push_back(static_cast<Index>(b));
    }
    offset += blk.rows * blk.cols;
  }
  const auto n = static_cast<Index>(full_of_unknown.size());

  const auto embed = [&](const Vector& u) {
    Vector full = Vector::Zero(full_size);
    for (Index k = 0; k < n; ++k) full(full_of_unknown[k]) = u(k);
    return full;
  };
  const auto extract = [&](const Vector& full) {
    Vector u(n);
    for (Index k = 0; k < n; ++k) u(k) = full(full_of_unknown[k]);
    return u;
  };
  const auto assemble = [&](const Vector& u, double scale) {
    const Vector full = embed(u) * scale;
    std::vector<Image> images;
    Index off = 0;
    for (const auto& blk : blocks) {
      images.emplace_back(full.segment(off, blk.rows * blk.cols).reshaped(blk.rows, blk.cols).array());
      off += blk.rows * blk.cols;
    }
    return images;
  };

  ReconResult result;
  const double z_norm = z.norm();
  if (n == 0 || z_norm == 0.0) {
    result.images = assemble(Vector::Zero(n), 1.0);
    result.residual = 0.0;
    result.converged = true;
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

  const LinearOperator reduced(
      op.rows(), n, [&op, &embed](const Vector& u) { return op.apply(embed(u)); },
      [&op, &extract](const Vector& y) { return extract(op.adjoint(y)); }, "reduced");
  const double op_norm = estimate_norm(reduced);
  if (op_norm == 0.0) throw std::invalid_argument("measurement operator is identically zero on the unknowns");
  const Vector back = reduced.adjoint(z) / (op_norm * op_norm);
  const double image_scale = std::max(back.cwiseAbs().maxCoeff(), 1e-300);
  const double data_scale = op_norm * image_scale;
  const Vector b = z / data_scale;
  const auto O = [&](const Vector& u) -> Vector { return reduced.apply(u) / op_norm; };
  const auto Ot = [&](const Vector& y) -> Vector { return reduced.adjoint(y) / op_norm; };

  const Gradient D(blocks, unknown_of_pixel, block_of_unknown);
  Vector tv_weight(n);
  for (Index k = 0; k < n; ++k) tv_weight(k) = blocks[static_cast<std::size_t>(block_of_unknown[k])].tv_weight;
  const Vector threshold = tv_weight / config.beta;

  const double beta = config.beta;
  const double gamma = config.gamma;
  const double eta = config.mu;
  const bool penalized = config.fidelity == Fidelity::Penalized;

  const auto normal_apply = [&](const Vector& x) -> Vector {
    return beta * D.adjoint(D.apply(x)) + gamma * x + eta * Ot(O(x));
  };
  const auto objective = [&](const Vector& v) {
    return tv_of_gradient(D.apply(v), tv_weight, config.tv) + 0.5 * config.mu * (O(v) - b).squaredNorm();
  };
  const auto project = [&](const Vector& x) -> Vector {
    return config.nonnegative ? Vector(x.cwiseMax(0.0)) : x;
  };

  Vector x = Vector::Zero(n);
  Vector w = Vector::Zero(2 * n);
  Vector v = Vector::Zero(n);
  Vector r = Vector::Zero(b.size());
  Vector uw = Vector::Zero(2 * n);
  Vector uv = Vector::Zero(n);
  Vector ur = Vector::Zero(b.size());
  const double b_norm = b.norm();

  for (int it = 1; it <= config.max_iterations; ++it) {
    // x-update: (beta D^T D + gamma I + eta O^T O) x = rhs, by CG.
    const Vector rhs = beta * D.adjoint(w - uw) + gamma * (v - uv) + eta * Ot(b + r - ur);
    Vector res = rhs - normal_apply(x);
    Vector dir = res;
    double rr = res.squaredNorm();
    const double stop = config.cg_tolerance * config.cg_tolerance * rhs.squaredNorm();
    for (int k = 0; k < config.cg_iterations && rr > stop; ++k) {
      const Vector Sd = normal_apply(dir);
      const double step = rr / dir.dot(Sd);
      x += step * dir;
      res -= step * Sd;
      const double rr_next = res.squaredNorm();
      dir = res + (rr_next / rr) * dir;
      rr = rr_next;
    }

    const Vector Dx = D.apply(x);
    const Vector Ox = O(x);
    const Vector w_next = shrink(Dx + uw, threshold, config.tv);
    const Vector v_next = project(x + uv);
    const Vector r_next = penalized ? Vector(eta * (Ox - b + ur) / (config.mu + eta)) : Vector::Zero(b.size());
    const Vector uw_next = uw + Dx - w_next;
    const Vector uv_next = uv + x - v_next;
    const Vector ur_next = ur + Ox - r_next - b;

    const double fixed_point = beta * ((w_next - w).squaredNorm() + (uw_next - uw).squaredNorm()) +
                               gamma * ((v_next - v).squaredNorm() + (uv_next - uv).squaredNorm()) +
                               eta * ((r_next - r).squaredNorm() + (ur_next - ur).squaredNorm());
    const double change = (v_next - v).norm() / std::max(v_next.norm(), 1e-300);
    const double infeasibility =
        std::max((Ox - r_next - b).norm() / b_norm, (x - v_next).norm() / std::max(v_next.norm(), 1e-300));

    w = w_next;
    v = v_next;
    r = r_next;
    uw = uw_next;
    uv = uv_next;
    ur = ur_next;
    result.fixed_point_residual.push_back(fixed_point);
    result.objective.push_back(objective(v));
    result.iterations = it;
    if (change < config.tolerance && infeasibility < config.tolerance) {
      result.converged = true;
      break;
    }
  }

  result.images = assemble(v, image_scale);
  result.residual = (op.apply(embed(v) * image_scale) - z).norm() / z_norm;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace lensless
