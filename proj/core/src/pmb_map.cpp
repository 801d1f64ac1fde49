#include "iplpmb/pmb_map.hpp"

#include "iplpmb/errors.hpp"
#include "iplpmb/linearization.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <string>

namespace iplpmb {

std::size_t kind_index(LandmarkKind kind) {
  switch (kind) {
    case LandmarkKind::VA: return 0;
    case LandmarkKind::SP: return 1;
    case LandmarkKind::BS: break;
  }
  throw UnsupportedKind("kind_index: the BS is not a map kind");
}

double PppIntensity::intensity(LandmarkKind kind, const Eigen::Vector3d& x) const {
  const double vol = volume();
  if (!(vol > 0.0) || !region.contains(x)) {
    return 0.0;
  }
  return rate_per_kind[kind_index(kind)] / vol;
}

LandmarkKind BernoulliComponent::map_kind() const {
  return kind_weights[1] > kind_weights[0] ? LandmarkKind::SP : LandmarkKind::VA;
}

const GaussianDensity& BernoulliComponent::density(LandmarkKind kind) const {
  const auto& d = kind_densities[kind_index(kind)];
  if (!d) {
    throw InvalidArgument("Bernoulli " + std::to_string(id) + " has no " + std::string(to_string(kind)) +
                          " density");
  }
  return *d;
}

PmbMap predict_map(const PmbMap& map) {
  return map;
}

namespace {

// log of integral over x of N(z; h(x, s), R) N(s; ue) dx, with h linearized around
// the landmark density and the UE prior.
double log_birth_integral(const Measurement& z, const GaussianDensity& ue_prior,
                          const GaussianDensity& landmark, LandmarkKind kind, const SensorModel& sensor,
                          const MeasurementModel& model) {
  const std::array<GaussianDensity, 2> parts{ue_prior, landmark};
  const GaussianDensity joint = stack_independent(parts);
  const ModelFunction h = stacked_measurement_fn(model, {kind});
  const AffineApprox approx = slr(h, joint).first;

  const Matrix h_s = approx.H.leftCols(kUeDim);
  const Matrix h_x = approx.H.rightCols(kLandmarkDim);
  Matrix c = h_s * ue_prior.cov() * h_s.transpose() + approx.omega + sensor.noise_cov;
  c = 0.5 * (c + c.transpose()).eval();
  Vector e = z.to_vector() - approx.H * joint.mean() - approx.b;
  wrap_circular(e, h.circular);

  Eigen::LLT<Matrix> llt_c(c);
  if (llt_c.info() != Eigen::Success) {
    throw SingularCovariance("birth: measurement covariance is singular");
  }
  const Matrix ci_hx = llt_c.solve(h_x);
  const Matrix a = h_x.transpose() * ci_hx;
  Eigen::LLT<Matrix> llt_a(a);
  if (llt_a.info() != Eigen::Success) {
    throw SingularCovariance("birth: landmark position unobservable from one measurement");
  }
  const Vector ci_e = llt_c.solve(e);
  const Vector proj = ci_hx.transpose() * e;
  const double quad = e.dot(ci_e) - proj.dot(llt_a.solve(proj));

  const Matrix lc = llt_c.matrixL();
  const Matrix la = llt_a.matrixL();
  const double logdet_c = 2.0 * lc.diagonal().array().log().sum();
  const double logdet_a = 2.0 * la.diagonal().array().log().sum();
  const auto free_dims = static_cast<double>(kMeasDim - kLandmarkDim);
  return -0.5 * free_dims * std::log(2.0 * std::numbers::pi) - 0.5 * logdet_c - 0.5 * logdet_a -
         0.5 * quad;
}

}  // namespace

BirthResult birth_bernoulli(const Measurement& z, const GaussianDensity& ue_prior, const PppIntensity& ppp,
                            const SensorModel& sensor, const MeasurementModel& model, std::uint64_t id) {
  BirthResult out;
  const double clutter = sensor.clutter_density();

  // Joint density of the measurement noise and the UE state feeding the inverse map.
  const std::array<GaussianDensity, 2> parts{GaussianDensity(z.to_vector(), sensor.noise_cov), ue_prior};
  const GaussianDensity noise_and_ue = stack_independent(parts);
  const Vector ue_mean = ue_prior.mean();

  BernoulliComponent b;
  b.id = id;
  for (LandmarkKind kind : kMapKinds) {
    const std::size_t k = kind_index(kind);
    ModelFunction inverse{[&model, kind](const Vector& y) -> Vector {
                            return model.invert(y.head(kMeasDim), y.tail(kUeDim), kind);
                          },
                          CircularMask(kLandmarkDim, false)};
    GaussianDensity position;
    try {
      const SlrStatistics stats = slr(inverse, noise_and_ue).second;
      position = GaussianDensity(stats.z_pred, ensure_psd(stats.s_zz, 0.0));
    } catch (const FunctionEvaluationFailure&) {
      continue;
    }
    const double lambda = ppp.intensity(kind, position.mean());
    const double p_d = model.in_fov(position.mean(), kind, ue_mean, sensor) ? sensor.detection_prob : 0.0;
    if (!(lambda > 0.0) || !(p_d > 0.0)) {
      continue;
    }
    double log_integral = 0.0;
    try {
      log_integral = log_birth_integral(z, ue_prior, position, kind, sensor, model);
    } catch (const Error&) {
      continue;
    }
    out.kind_likelihood[k] = lambda * p_d * std::exp(log_integral);
    b.kind_densities[k] = std::move(position);
  }

  out.likelihood = out.kind_likelihood[0] + out.kind_likelihood[1];
  out.weight = clutter + out.likelihood;
  if (out.likelihood > 0.0 && std::isfinite(out.likelihood)) {
    b.existence = out.likelihood / out.weight;
    for (std::size_t k = 0; k < kNumMapKinds; ++k) {
      b.kind_weights[k] = out.kind_likelihood[k] / out.likelihood;
      if (b.kind_weights[k] == 0.0) {
        b.kind_densities[k].reset();
      }
    }
    out.bernoulli = std::move(b);
  }
  return out;
}

MisdetectionResult misdetection_update(const BernoulliComponent& b, double p_detect) {
  return misdetection_update(b, KindArray{p_detect, p_detect});
}

MisdetectionResult misdetection_update(const BernoulliComponent& b, const KindArray& p_detect_per_kind) {
  MisdetectionResult out{b, 1.0};
  double p_eff = 0.0;
  KindArray miss{};
  double miss_total = 0.0;
  for (std::size_t k = 0; k < kNumMapKinds; ++k) {
    p_eff += b.kind_weights[k] * p_detect_per_kind[k];
    miss[k] = b.kind_weights[k] * (1.0 - p_detect_per_kind[k]);
    miss_total += miss[k];
  }
  out.weight = 1.0 - b.existence * p_eff;
  if (out.weight > 0.0) {
    out.bernoulli.existence = std::clamp(b.existence * miss_total / out.weight, 0.0, 1.0);
  }
  if (miss_total > 0.0 && p_detect_per_kind[0] != p_detect_per_kind[1]) {
    for (std::size_t k = 0; k < kNumMapKinds; ++k) {
      out.bernoulli.kind_weights[k] = miss[k] / miss_total;
    }
  }
  return out;
}

namespace {

BernoulliComponent merge_weighted(std::span<const double> weights,
                                  std::span<const BernoulliComponent* const> parts, double existence) {
  BernoulliComponent out;
  out.id = parts.front()->id;
  out.existence = existence;
  KindArray mass{0.0, 0.0};
  for (std::size_t k = 0; k < kNumMapKinds; ++k) {
    std::vector<double> w;
    std::vector<GaussianDensity> dens;
    for (std::size_t h = 0; h < parts.size(); ++h) {
      const double m = weights[h] * parts[h]->existence * parts[h]->kind_weights[k];
      if (m > 0.0 && parts[h]->kind_densities[k]) {
        w.push_back(m);
        dens.push_back(*parts[h]->kind_densities[k]);
        mass[k] += m;
      }
    }
    if (mass[k] > 0.0) {
      for (double& x : w) {
        x /= mass[k];
      }
      out.kind_densities[k] = moment_match(w, dens);
    }
  }
  const double total = mass[0] + mass[1];
  if (total > 0.0) {
    for (std::size_t k = 0; k < kNumMapKinds; ++k) {
      out.kind_weights[k] = mass[k] / total;
    }
  } else {
    out.kind_weights = parts.front()->kind_weights;
    out.kind_densities = parts.front()->kind_densities;
  }
  return out;
}

}  // namespace

PmbMap pmbm_to_pmb(const PppIntensity& ppp, std::span<const HypothesisMap> hypotheses, std::uint64_t next_id) {
  if (hypotheses.empty()) {
    throw EmptyHypothesisSet("pmbm_to_pmb: no hypotheses");
  }
  double total = 0.0;
  for (const auto& h : hypotheses) {
    if (!(h.weight >= 0.0)) {
      throw InvalidArgument("pmbm_to_pmb: negative hypothesis weight");
    }
    total += h.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("pmbm_to_pmb: hypothesis weights sum to " + std::to_string(total));
  }

  PmbMap out;
  out.ppp = ppp;
  out.next_id = next_id;
  if (hypotheses.size() == 1) {
    out.bernoullis = hypotheses.front().bernoullis;
    return out;
  }

  std::vector<std::uint64_t> order;
  std::map<std::uint64_t, std::vector<std::pair<double, const BernoulliComponent*>>> by_id;
  for (const auto& h : hypotheses) {
    for (const auto& b : h.bernoullis) {
      auto [it, inserted] = by_id.try_emplace(b.id);
      if (inserted) {
        order.push_back(b.id);
      }
      it->second.emplace_back(h.weight, &b);
    }
  }
  out.bernoullis.reserve(order.size());
  for (std::uint64_t id : order) {
    const auto& entries = by_id.at(id);
    double existence = 0.0;
    std::vector<double> w;
    std::vector<const BernoulliComponent*> parts;
    for (const auto& [weight, b] : entries) {
      existence += weight * b->existence;
      w.push_back(weight);
      parts.push_back(b);
    }
    out.bernoullis.push_back(merge_weighted(w, parts, std::clamp(existence, 0.0, 1.0)));
  }
  return out;
}

namespace {

double mahalanobis(const GaussianDensity& a, const GaussianDensity& b) {
  const Vector diff = a.mean() - b.mean();
  Eigen::LDLT<Matrix> ldlt(a.cov() + b.cov());
  if (ldlt.info() != Eigen::Success) {
    return std::numeric_limits<double>::infinity();
  }
  return std::sqrt(std::max(0.0, diff.dot(ldlt.solve(diff))));
}

}  // namespace

PmbMap prune(const PmbMap& map, const PruneOptions& opts) {
  PmbMap out;
  out.ppp = map.ppp;
  out.next_id = map.next_id;
  for (const auto& b : map.bernoullis) {
    if (b.existence < opts.r_min) {
      continue;
    }
    BernoulliComponent kept = b;
    double total = 0.0;
    for (std::size_t k = 0; k < kNumMapKinds; ++k) {
      if (kept.kind_weights[k] < opts.kind_w_min || !kept.kind_densities[k]) {
        kept.kind_weights[k] = 0.0;
        kept.kind_densities[k].reset();
      }
      total += kept.kind_weights[k];
    }
    if (!(total > 0.0)) {
      continue;
    }
    if (total != 1.0) {
      for (double& w : kept.kind_weights) {
        w /= total;
      }
    }
    out.bernoullis.push_back(std::move(kept));
  }
  if (!(opts.merge_dist > 0.0)) {
    return out;
  }

  auto& bs = out.bernoullis;
  bool merged_any = true;
  while (merged_any) {
    merged_any = false;
    std::vector<std::size_t> idx(bs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return bs[a].existence > bs[b].existence; });
    std::vector<bool> gone(bs.size(), false);
    for (std::size_t ii = 0; ii < idx.size(); ++ii) {
      const std::size_t i = idx[ii];
      if (gone[i]) {
        continue;
      }
      for (std::size_t jj = ii + 1; jj < idx.size(); ++jj) {
        const std::size_t j = idx[jj];
        if (gone[j] || bs[i].map_kind() != bs[j].map_kind()) {
          continue;
        }
        const LandmarkKind kind = bs[i].map_kind();
        if (mahalanobis(bs[i].density(kind), bs[j].density(kind)) >= opts.merge_dist) {
          continue;
        }
        // merge_weighted scales each part by its own existence already.
        const double r = std::min(1.0, bs[i].existence + bs[j].existence);
        const std::array<double, 2> w{1.0, 1.0};
        const std::array<const BernoulliComponent*, 2> parts{&bs[i], &bs[j]};
        BernoulliComponent merged = merge_weighted(w, parts, r);
        merged.id = bs[i].id;
        bs[i] = std::move(merged);
        gone[j] = true;
        merged_any = true;
      }
    }
    std::vector<BernoulliComponent> survivors;
    survivors.reserve(bs.size());
    for (std::size_t i = 0; i < bs.size(); ++i) {
      if (!gone[i]) {
        survivors.push_back(std::move(bs[i]));
      }
    }
    bs = std::move(survivors);
  }
  return out;
}

}  // namespace iplpmb
