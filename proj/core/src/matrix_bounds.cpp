#include "riskbound/matrix_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <mutex>

#include "riskbound/errors.hpp"
#include "riskbound/numeric.hpp"

namespace riskbound {

namespace {

constexpr double kEvFloor = 1e-300;
constexpr double kMassGate = 1e-12;
constexpr double kCondLimit = 1e12;
constexpr double kPsdTol = 1e-10;
const double kInf = std::numeric_limits<double>::infinity();
const double kLogFloor = std::log(1e-300);
const double kLog2Pi = std::log(2.0 * M_PI);

std::string fmt_param(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_matrix(const Mat& M) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    if (i) out += ";";
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) out += ",";
      out += fmt_param(M(i, j));
    }
  }
  out += "]";
  return out;
}

// Normal(0, cov) log density through a cached Cholesky factor.
struct GaussianKernel {
  Eigen::LLT<Mat> llt;
  double log_norm = 0.0;

  double log_density(const Vec& x) const {
    const Vec z = llt.matrixL().solve(x);
    return log_norm - 0.5 * z.squaredNorm();
  }
};

GaussianKernel make_kernel(const Mat& cov, const std::string& name) {
  if (cov.rows() != cov.cols() || cov.rows() < 1) {
    throw NotSPD(name + " must be a nonempty square matrix");
  }
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
    throw NotSPD(name + " must be symmetric");
  }
  GaussianKernel k;
  k.llt.compute(cov);
  if (k.llt.info() != Eigen::Success) {
    throw NotSPD(name + " must be positive definite");
  }
  double log_det = 0.0;
  const auto& L = k.llt.matrixLLT();
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    if (!(L(i, i) > 0.0)) throw NotSPD(name + " must be positive definite");
    log_det += 2.0 * std::log(L(i, i));
  }
  k.log_norm = -0.5 * (static_cast<double>(cov.rows()) * kLog2Pi + log_det);
  return k;
}

struct TensorGrid {
  std::vector<std::vector<double>> nodes;
  std::vector<std::vector<double>> weights;
  std::vector<std::size_t> stride;
  std::size_t total = 1;
};

TensorGrid make_grid(int dims, const std::function<Interval(int)>& box,
                     double pad, int nodes_per_axis) {
  const GaussLegendreRule& rule = gauss_legendre(nodes_per_axis);
  TensorGrid g;
  g.nodes.resize(dims);
  g.weights.resize(dims);
  g.stride.assign(dims, 1);
  for (int d = 0; d < dims; ++d) {
    const Interval r = box(d);
    const double lo = r.lo - pad;
    const double hi = r.hi + pad;
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw NonFinite("degenerate quadrature box on axis " +
                      std::to_string(d));
    }
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    g.nodes[d].resize(rule.nodes.size());
    g.weights[d].resize(rule.nodes.size());
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      g.nodes[d][k] = mid + half * rule.nodes[k];
      g.weights[d][k] = half * rule.weights[k];
    }
  }
  for (int d = dims - 2; d >= 0; --d) {
    g.stride[d] = g.stride[d + 1] * g.nodes[d + 1].size();
  }
  g.total = dims == 0 ? 1 : g.stride[0] * g.nodes[0].size();
  return g;
}

double decode(const TensorGrid& g, std::size_t flat, Vec& x) {
  double w = 1.0;
  for (std::size_t d = 0; d < g.nodes.size(); ++d) {
    const std::size_t idx = (flat / g.stride[d]) % g.nodes[d].size();
    x[static_cast<Eigen::Index>(d)] = g.nodes[d][idx];
    w *= g.weights[d][idx];
  }
  return w;
}

using PsiEval = std::function<Vec(const Vec&, const Vec&)>;
using MeanG = std::function<Vec(const Vec&)>;

double ratio_term(double log_shift, double log_base, double expo) {
  if (std::isinf(log_shift)) return 0.0;
  return std::exp(expo * (log_shift - log_base));
}

MeanG make_mean_g(const VectorModel& m, const IntegrationConfig& cfg) {
  if (m.analytic_posterior_mean_g) return *m.analytic_posterior_mean_g;
  struct Cache {
    std::mutex mu;
    std::map<std::vector<double>, Vec> map;
  };
  auto cache = std::make_shared<Cache>();
  const VectorModel* mp = &m;
  return [mp, cfg, cache](const Vec& y) {
    std::vector<double> key(y.data(), y.data() + y.size());
    {
      std::lock_guard<std::mutex> lock(cache->mu);
      auto it = cache->map.find(key);
      if (it != cache->map.end()) return it->second;
    }
    const Vec v = posterior_mean_g(*mp, y, cfg);
    std::lock_guard<std::mutex> lock(cache->mu);
    return cache->map.emplace(std::move(key), v).first->second;
  };
}

PsiEval compile_psi(const VectorModel& m, const VectorPsiSpec& spec,
                    const MeanG& mean_g) {
  validate_vector_psi_spec(m, spec);
  switch (spec.kind) {
    case VectorPsiKind::stacked_ww: {
      const VectorModel* mp = &m;
      const std::vector<WwComponent> comps = spec.components;
      return [mp, comps](const Vec& y, const Vec& theta) {
        Vec out = Vec::Zero(static_cast<Eigen::Index>(comps.size()));
        const double base = mp->log_prior(theta) + mp->log_likelihood(y, theta);
        if (std::isinf(base)) return out;
        Vec shifted = theta;
        for (std::size_t j = 0; j < comps.size(); ++j) {
          const WwComponent& c = comps[j];
          shifted = theta;
          shifted[c.axis] += c.h;
          const double up =
              mp->log_prior(shifted) + mp->log_likelihood(y, shifted);
          shifted[c.axis] = theta[c.axis] - c.h;
          const double down =
              mp->log_prior(shifted) + mp->log_likelihood(y, shifted);
          out[static_cast<Eigen::Index>(j)] = ratio_term(up, base, c.s) -
                                              ratio_term(down, base, 1.0 - c.s);
        }
        return out;
      };
    }
    case VectorPsiKind::optimal: {
      const VectorModel* mp = &m;
      return [mp, mean_g](const Vec& y, const Vec& theta) {
        return (mp->target(theta) - mean_g(y)).eval();
      };
    }
    case VectorPsiKind::custom:
      return spec.custom_fn;
  }
  throw InvalidSpec("unknown vector test-function kind");
}

double psi_pads(const VectorPsiSpec& spec) {
  double pad = 0.0;
  if (spec.kind == VectorPsiKind::stacked_ww) {
    for (const WwComponent& c : spec.components) {
      pad = std::max(pad, 2.0 * std::abs(c.h));
    }
  }
  return pad;
}

// Unnormalized theta-moments of {1, g, Psi, g Psi^T, Psi Psi^T} under
// prior * likelihood at a fixed y.
struct InnerMomentsY {
  double ev = 0.0;
  Vec eg;
  Vec epsi;
  Mat egpsi;
  Mat epsipsi;
};

InnerMomentsY inner_moments_at_y(const VectorModel& m, const PsiEval& psi,
                                 const Vec& y, int q, int r, double pad,
                                 const IntegrationConfig& cfg) {
  InnerMomentsY out;
  out.eg = Vec::Zero(q);
  out.epsi = Vec::Zero(r);
  out.egpsi = Mat::Zero(q, r);
  out.epsipsi = Mat::Zero(r, r);
  const TensorGrid grid = make_grid(
      m.parameter_dim,
      [&](int axis) { return m.theta_range_given_y(axis, y, cfg.tail_sigmas); },
      pad, cfg.nodes_per_axis);
  Vec theta(m.parameter_dim);
  for (std::size_t flat = 0; flat < grid.total; ++flat) {
    const double w = decode(grid, flat, theta);
    const double dens = m.prior(theta) * m.likelihood(y, theta);
    if (!std::isfinite(dens)) throw NonFinite("joint density is not finite");
    if (!(dens > 0.0)) continue;
    const double wd = w * dens;
    const Vec g = m.target(theta);
    const Vec p = psi(y, theta);
    if (!g.allFinite() || !p.allFinite()) {
      throw NonFinite("integrand is not finite at a quadrature node");
    }
    out.ev += wd;
    out.eg.noalias() += wd * g;
    out.epsi.noalias() += wd * p;
    out.egpsi.noalias() += wd * g * p.transpose();
    out.epsipsi.noalias() += wd * p * p.transpose();
  }
  return out;
}

MatrixBoundStatus psd_inverse_form(const Mat& C, const Mat& V, Mat* out) {
  const Mat vs = 0.5 * (V + V.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(vs, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (lmin < -kPsdTol * std::max(1.0, lmax)) {
    return MatrixBoundStatus::non_psd_input;
  }
  if (!(lmin > 0.0) || lmax / lmin >= kCondLimit) {
    return MatrixBoundStatus::singular_psi_cov;
  }
  Eigen::LLT<Mat> llt(vs);
  if (llt.info() != Eigen::Success) return MatrixBoundStatus::singular_psi_cov;
  const Mat form = C * llt.solve(C.transpose());
  *out = 0.5 * (form + form.transpose());
  return MatrixBoundStatus::ok;
}

MatrixBoundResult fail(BoundFlavor flavor, MatrixBoundStatus status, Mat cross,
                       Mat psi_cov) {
  MatrixBoundResult r;
  r.flavor = flavor;
  r.status = status;
  r.cross_matrix = std::move(cross);
  r.psi_cov = std::move(psi_cov);
  return r;
}

MatrixBoundResult mat_bound_global(const VectorModel& m, const PsiEval& psi,
                                   const MeanG& mean_g, int q, int r,
                                   double pad, const IntegrationConfig& cfg) {
  const TensorGrid outer = make_grid(
      m.observation_dim,
      [&](int axis) { return m.y_marginal_range(axis, cfg.tail_sigmas); }, pad,
      cfg.nodes_per_axis);
  std::vector<InnerMomentsY> slots(outer.total);
  std::vector<double> wout(outer.total, 0.0);
  std::vector<Vec> ynode(outer.total, Vec(m.observation_dim));
  parallel_for(outer.total, cfg.workers, [&](std::size_t i) {
    wout[i] = decode(outer, i, ynode[i]);
    slots[i] = inner_moments_at_y(m, psi, ynode[i], q, r, pad, cfg);
  });
  Vec e_psi = Vec::Zero(r);
  Mat m2 = Mat::Zero(r, r);
  Mat cross = Mat::Zero(q, r);
  double mass = 0.0;
  for (std::size_t i = 0; i < outer.total; ++i) {
    const InnerMomentsY& s = slots[i];
    if (!(s.ev >= kEvFloor)) continue;
    const double w = wout[i];
    const Vec mu = m.analytic_posterior_mean_g
                       ? (*m.analytic_posterior_mean_g)(ynode[i])
                       : Vec((s.eg / s.ev).eval());
    mass += w * s.ev;
    e_psi.noalias() += w * s.epsi;
    m2.noalias() += w * s.epsipsi;
    cross.noalias() += w * (s.egpsi - mu * s.epsi.transpose());
  }
  if (!(mass > 0.0)) throw ZeroEvidence("observation grid carries no mass");
  // normalizing by captured mass keeps a constant test function exactly
  // degenerate instead of leaving truncation residue in the covariance
  e_psi /= mass;
  m2 /= mass;
  cross /= mass;
  const Mat cov = m2 - e_psi * e_psi.transpose();
  MatrixBoundResult out;
  out.flavor = BoundFlavor::global;
  out.cross_matrix = cross;
  out.psi_cov = cov;
  out.status = psd_inverse_form(cross, cov, &out.bound_matrix);
  (void)mean_g;
  return out;
}

MatrixBoundResult mat_bound_conditional(const VectorModel& m,
                                        const PsiEval& psi, const Vec& y,
                                        int q, int r, double pad,
                                        const IntegrationConfig& cfg) {
  const InnerMomentsY s = inner_moments_at_y(m, psi, y, q, r, pad, cfg);
  if (!(s.ev >= kEvFloor)) {
    throw ZeroEvidence("marginal density underflow at the given observation");
  }
  const Vec mu = m.analytic_posterior_mean_g
                     ? (*m.analytic_posterior_mean_g)(y)
                     : Vec((s.eg / s.ev).eval());
  const Vec e_psi = s.epsi / s.ev;
  const Mat cross = s.egpsi / s.ev - mu * e_psi.transpose();
  const Mat cov = s.epsipsi / s.ev - e_psi * e_psi.transpose();
  MatrixBoundResult out;
  out.flavor = BoundFlavor::conditional;
  out.cross_matrix = cross;
  out.psi_cov = cov;
  out.status = psd_inverse_form(cross, cov, &out.bound_matrix);
  return out;
}

MatrixBoundResult mat_bound_avg_conditional(const VectorModel& m,
                                            const PsiEval& psi, int q, int r,
                                            double pad,
                                            const IntegrationConfig& cfg) {
  const TensorGrid outer = make_grid(
      m.observation_dim,
      [&](int axis) { return m.y_marginal_range(axis, cfg.tail_sigmas); }, pad,
      cfg.nodes_per_axis);
  std::vector<InnerMomentsY> slots(outer.total);
  std::vector<double> wout(outer.total, 0.0);
  std::vector<Vec> ynode(outer.total, Vec(m.observation_dim));
  parallel_for(outer.total, cfg.workers, [&](std::size_t i) {
    wout[i] = decode(outer, i, ynode[i]);
    slots[i] = inner_moments_at_y(m, psi, ynode[i], q, r, pad, cfg);
  });
  Mat bound = Mat::Zero(q, q);
  Mat cross_acc = Mat::Zero(q, r);
  Mat cov_acc = Mat::Zero(r, r);
  double mass_acc = 0.0;
  for (std::size_t i = 0; i < outer.total; ++i) {
    const InnerMomentsY& s = slots[i];
    if (!(s.ev >= kEvFloor)) continue;
    const double mass = wout[i] * s.ev;
    const Vec mu = m.analytic_posterior_mean_g
                       ? (*m.analytic_posterior_mean_g)(ynode[i])
                       : Vec((s.eg / s.ev).eval());
    const Vec e_psi = s.epsi / s.ev;
    const Mat cross = s.egpsi / s.ev - mu * e_psi.transpose();
    const Mat cov = s.epsipsi / s.ev - e_psi * e_psi.transpose();
    Mat node;
    const MatrixBoundStatus st = psd_inverse_form(cross, cov, &node);
    if (st != MatrixBoundStatus::ok) {
      if (mass > kMassGate) {
        return fail(BoundFlavor::avg_conditional, st, cross, cov);
      }
      continue;
    }
    bound.noalias() += mass * node;
    cross_acc.noalias() += mass * cross;
    cov_acc.noalias() += mass * cov;
    mass_acc += mass;
  }
  MatrixBoundResult out;
  out.flavor = BoundFlavor::avg_conditional;
  out.status = MatrixBoundStatus::ok;
  out.bound_matrix = 0.5 * (bound + bound.transpose());
  if (mass_acc > 0.0) {
    out.cross_matrix = cross_acc / mass_acc;
    out.psi_cov = cov_acc / mass_acc;
  } else {
    out.cross_matrix = cross_acc;
    out.psi_cov = cov_acc;
  }
  return out;
}

MatrixBoundResult mat_bound_avg_theta(const VectorModel& m, const PsiEval& psi,
                                      const MeanG& mean_g, int q, int r,
                                      double pad,
                                      const IntegrationConfig& cfg) {
  const TensorGrid outer = make_grid(
      m.parameter_dim,
      [&](int axis) { return m.theta_range(axis, cfg.tail_sigmas); }, pad,
      cfg.nodes_per_axis);
  struct NodeOut {
    double mass = 0.0;
    Mat cross;
    Mat m2;
  };
  std::vector<NodeOut> slots(outer.total);
  parallel_for(outer.total, cfg.workers, [&](std::size_t i) {
    Vec theta(m.parameter_dim);
    const double w = decode(outer, i, theta);
    const double pr = m.prior(theta);
    if (!(pr > 0.0)) return;
    NodeOut& slot = slots[i];
    slot.mass = w * pr;
    slot.cross = Mat::Zero(q, r);
    slot.m2 = Mat::Zero(r, r);
    const TensorGrid inner = make_grid(
        m.observation_dim,
        [&](int axis) {
          return m.y_range_given_theta(axis, theta, cfg.tail_sigmas);
        },
        pad, cfg.nodes_per_axis);
    const Vec g = m.target(theta);
    Vec y(m.observation_dim);
    for (std::size_t flat = 0; flat < inner.total; ++flat) {
      const double wy = decode(inner, flat, y);
      const double lk = m.likelihood(y, theta);
      if (!std::isfinite(lk)) throw NonFinite("likelihood is not finite");
      if (!(lk > 0.0)) continue;
      const Vec p = psi(y, theta);
      if (!p.allFinite()) {
        throw NonFinite("test function is not finite at a quadrature node");
      }
      const Vec err = g - mean_g(y);
      slot.cross.noalias() += wy * lk * err * p.transpose();
      slot.m2.noalias() += wy * lk * p * p.transpose();
    }
  });
  Mat bound = Mat::Zero(q, q);
  Mat cross_acc = Mat::Zero(q, r);
  Mat m2_acc = Mat::Zero(r, r);
  double mass_acc = 0.0;
  for (std::size_t i = 0; i < outer.total; ++i) {
    const NodeOut& slot = slots[i];
    if (!(slot.mass > 0.0)) continue;
    Mat node;
    const MatrixBoundStatus st = psd_inverse_form(slot.cross, slot.m2, &node);
    if (st != MatrixBoundStatus::ok) {
      if (slot.mass > kMassGate) {
        return fail(BoundFlavor::avg_theta, st, slot.cross, slot.m2);
      }
      continue;
    }
    bound.noalias() += slot.mass * node;
    cross_acc.noalias() += slot.mass * slot.cross;
    m2_acc.noalias() += slot.mass * slot.m2;
    mass_acc += slot.mass;
  }
  MatrixBoundResult out;
  out.flavor = BoundFlavor::avg_theta;
  out.status = MatrixBoundStatus::ok;
  out.bound_matrix = 0.5 * (bound + bound.transpose());
  if (mass_acc > 0.0) {
    out.cross_matrix = cross_acc / mass_acc;
    out.psi_cov = m2_acc / mass_acc;
  } else {
    out.cross_matrix = cross_acc;
    out.psi_cov = m2_acc;
  }
  return out;
}

}  // namespace

std::string to_string(MatrixBoundStatus status) {
  switch (status) {
    case MatrixBoundStatus::ok: return "ok";
    case MatrixBoundStatus::singular_psi_cov: return "singular_psi_cov";
    case MatrixBoundStatus::non_psd_input: return "non_psd_input";
  }
  throw DomainError("unknown matrix bound status");
}

VectorModel make_linear_gaussian_vector_model(const Mat& H,
                                              const Mat& prior_cov,
                                              const Mat& noise_cov) {
  const int p = static_cast<int>(H.cols());
  const int mdim = static_cast<int>(H.rows());
  if (p < 1 || mdim < 1) throw InvalidSpec("H must be nonempty");
  if (prior_cov.rows() != p || prior_cov.cols() != p) {
    throw InvalidSpec("prior_cov must be p x p");
  }
  if (noise_cov.rows() != mdim || noise_cov.cols() != mdim) {
    throw InvalidSpec("noise_cov must be m x m");
  }

  struct State {
    Mat H;
    Mat prior_cov;
    Mat noise_cov;
    Mat marg_cov;
    Mat post_cov;
    Mat gain;
    GaussianKernel prior_k;
    GaussianKernel noise_k;
    int p = 0;
    int m = 0;
  };
  auto st = std::make_shared<State>();
  st->H = H;
  st->prior_cov = prior_cov;
  st->noise_cov = noise_cov;
  st->p = p;
  st->m = mdim;
  st->prior_k = make_kernel(prior_cov, "prior_cov");
  st->noise_k = make_kernel(noise_cov, "noise_cov");
  const Mat rinv_h = st->noise_k.llt.solve(H);
  const Mat post_prec =
      st->prior_k.llt.solve(Mat::Identity(p, p)) + H.transpose() * rinv_h;
  Eigen::LLT<Mat> post_llt(0.5 * (post_prec + post_prec.transpose()));
  if (post_llt.info() != Eigen::Success) {
    throw NotSPD("posterior precision is not positive definite");
  }
  st->post_cov = post_llt.solve(Mat::Identity(p, p));
  st->gain = post_llt.solve(rinv_h.transpose());
  st->marg_cov = H * prior_cov * H.transpose() + noise_cov;

  VectorModel m;
  m.parameter_dim = p;
  m.observation_dim = mdim;
  m.target_dim = p;
  m.label = "linear_gaussian_vector(H=" + fmt_matrix(H) +
            ",prior_cov=" + fmt_matrix(prior_cov) +
            ",noise_cov=" + fmt_matrix(noise_cov) + ")";

  m.log_prior = [st](const Vec& t) {
    if (t.size() != st->p) throw DomainError("theta has the wrong dimension");
    const double l = st->prior_k.log_density(t);
    return l < kLogFloor ? -kInf : l;
  };
  m.prior = [lp = m.log_prior](const Vec& t) {
    const double l = lp(t);
    return std::isinf(l) ? 0.0 : std::exp(l);
  };
  m.log_likelihood = [st](const Vec& y, const Vec& t) {
    if (y.size() != st->m || t.size() != st->p) {
      throw DomainError("observation or theta has the wrong dimension");
    }
    const double l = st->noise_k.log_density(y - st->H * t);
    return l < kLogFloor ? -kInf : l;
  };
  m.likelihood = [ll = m.log_likelihood](const Vec& y, const Vec& t) {
    const double l = ll(y, t);
    return std::isinf(l) ? 0.0 : std::exp(l);
  };
  m.target = [](const Vec& t) { return t; };
  m.analytic_posterior_mean_g = [st](const Vec& y) {
    if (y.size() != st->m) throw DomainError("observation has the wrong dimension");
    return (st->gain * y).eval();
  };

  m.theta_range = [st](int axis, double k) {
    const double sd = std::sqrt(st->prior_cov(axis, axis));
    return Interval{-k * sd, k * sd};
  };
  m.y_range_given_theta = [st](int axis, const Vec& theta, double k) {
    const double c = (st->H * theta)(axis);
    const double sd = std::sqrt(st->noise_cov(axis, axis));
    return Interval{c - k * sd, c + k * sd};
  };
  m.theta_range_given_y = [st](int axis, const Vec& y, double k) {
    const double c = (st->gain * y)(axis);
    const double sd = std::sqrt(st->post_cov(axis, axis));
    return Interval{c - k * sd, c + k * sd};
  };
  m.y_marginal_range = [st](int axis, double k) {
    const double sd = std::sqrt(st->marg_cov(axis, axis));
    return Interval{-k * sd, k * sd};
  };
  return m;
}

int psi_dim(const VectorModel& m, const VectorPsiSpec& spec) {
  switch (spec.kind) {
    case VectorPsiKind::stacked_ww:
      return static_cast<int>(spec.components.size());
    case VectorPsiKind::optimal:
      return m.target_dim;
    case VectorPsiKind::custom:
      return spec.custom_dim;
  }
  throw InvalidSpec("unknown vector test-function kind");
}

void validate_vector_psi_spec(const VectorModel& m, const VectorPsiSpec& spec) {
  switch (spec.kind) {
    case VectorPsiKind::stacked_ww: {
      if (spec.components.empty()) {
        throw InvalidSpec("stacked test function needs at least one component");
      }
      for (const WwComponent& c : spec.components) {
        if (c.axis < 0 || c.axis >= m.parameter_dim) {
          throw InvalidSpec("component axis outside the parameter dimension");
        }
        if (!(std::isfinite(c.h)) || c.h == 0.0) {
          throw InvalidSpec("component shift h must be finite and nonzero");
        }
        if (!(c.s > 0.0) || c.s > 1.0) {
          throw InvalidSpec("component exponent s must lie in (0, 1]");
        }
      }
      return;
    }
    case VectorPsiKind::optimal:
      return;
    case VectorPsiKind::custom:
      if (spec.custom_dim < 1 || !spec.custom_fn) {
        throw InvalidSpec("custom test function needs a dimension and a map");
      }
      return;
  }
  throw InvalidSpec("unknown vector test-function kind");
}

MatrixBoundResult mat_bound(const VectorModel& m, const VectorPsiSpec& spec,
                            BoundFlavor flavor, const IntegrationConfig& cfg,
                            const std::optional<Vec>& y) {
  validate_config(cfg);
  validate_vector_psi_spec(m, spec);
  const int q = m.target_dim;
  const int r = psi_dim(m, spec);
  const double pad = psi_pads(spec);
  const MeanG mean_g = make_mean_g(m, cfg);
  const PsiEval psi = compile_psi(m, spec, mean_g);
  if (flavor == BoundFlavor::conditional) {
    if (!y) throw InvalidSpec("the conditional flavor requires an observation");
    if (y->size() != m.observation_dim) {
      throw DomainError("observation has the wrong dimension");
    }
    return mat_bound_conditional(m, psi, *y, q, r, pad, cfg);
  }
  if (y) {
    throw InvalidSpec("only the conditional flavor takes an observation");
  }
  switch (flavor) {
    case BoundFlavor::global:
      return mat_bound_global(m, psi, mean_g, q, r, pad, cfg);
    case BoundFlavor::avg_conditional:
      return mat_bound_avg_conditional(m, psi, q, r, pad, cfg);
    case BoundFlavor::avg_theta:
      return mat_bound_avg_theta(m, psi, mean_g, q, r, pad, cfg);
    default:
      throw InvalidSpec("flavor '" + to_string(flavor) +
                        "' has no matrix form");
  }
}

Mat mse_matrix_exact(const VectorModel& m,
                     const std::function<Vec(const Vec&)>& estimate,
                     const IntegrationConfig& cfg) {
  validate_config(cfg);
  if (!estimate) throw InvalidSpec("estimator has no rule");
  const int q = m.target_dim;
  const TensorGrid outer = make_grid(
      m.parameter_dim,
      [&](int axis) { return m.theta_range(axis, cfg.tail_sigmas); }, 0.0,
      cfg.nodes_per_axis);
  std::vector<Mat> slots(outer.total);
  parallel_for(outer.total, cfg.workers, [&](std::size_t i) {
    Vec theta(m.parameter_dim);
    const double w = decode(outer, i, theta);
    const double pr = m.prior(theta);
    if (!(pr > 0.0)) return;
    const TensorGrid inner = make_grid(
        m.observation_dim,
        [&](int axis) {
          return m.y_range_given_theta(axis, theta, cfg.tail_sigmas);
        },
        0.0, cfg.nodes_per_axis);
    Mat acc = Mat::Zero(q, q);
    const Vec g = m.target(theta);
    Vec y(m.observation_dim);
    for (std::size_t flat = 0; flat < inner.total; ++flat) {
      const double wy = decode(inner, flat, y);
      const double lk = m.likelihood(y, theta);
      if (!(lk > 0.0)) continue;
      const Vec err = g - estimate(y);
      if (!err.allFinite()) throw NonFinite("estimator error is not finite");
      acc.noalias() += wy * lk * err * err.transpose();
    }
    slots[i] = (w * pr) * acc;
  });
  Mat total = Mat::Zero(q, q);
  for (const Mat& s : slots) {
    if (s.size() != 0) total += s;
  }
  return 0.5 * (total + total.transpose());
}

Vec posterior_mean_g(const VectorModel& m, const Vec& y,
                     const IntegrationConfig& cfg) {
  if (m.analytic_posterior_mean_g) return (*m.analytic_posterior_mean_g)(y);
  if (y.size() != m.observation_dim) {
    throw DomainError("observation has the wrong dimension");
  }
  const TensorGrid grid = make_grid(
      m.parameter_dim,
      [&](int axis) { return m.theta_range_given_y(axis, y, cfg.tail_sigmas); },
      0.0, cfg.nodes_per_axis);
  double ev = 0.0;
  Vec eg = Vec::Zero(m.target_dim);
  Vec theta(m.parameter_dim);
  for (std::size_t flat = 0; flat < grid.total; ++flat) {
    const double w = decode(grid, flat, theta);
    const double dens = m.prior(theta) * m.likelihood(y, theta);
    if (!(dens > 0.0)) continue;
    ev += w * dens;
    eg.noalias() += (w * dens) * m.target(theta);
  }
  if (!(ev >= kEvFloor)) {
    throw ZeroEvidence("marginal density underflow at the given observation");
  }
  return eg / ev;
}

LoewnerReport check_loewner(const Mat& A, const Mat& B, double tol) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows()) {
    throw DomainError("matrices must be square with matching dimensions");
  }
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw NotSymmetric("left matrix is not symmetric");
  }
  if ((B - B.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw NotSymmetric("right matrix is not symmetric");
  }
  const Mat d = 0.5 * ((A - B) + (A - B).transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(d, Eigen::EigenvaluesOnly);
  LoewnerReport out;
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  out.holds = out.min_eigenvalue >= -tol;
  return out;
}

std::string model_digest(const VectorModel& m) {
  return hex64(fnv1a64(m.label));
}

}  // namespace riskbound
