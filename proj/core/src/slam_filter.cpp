#include "iplpmb/slam_filter.hpp"

#include "iplpmb/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace iplpmb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Keeps log(1 - r p_D) finite when detection is certain.
constexpr double kMissFloor = 1e-12;

double log_miss(double r_times_pd) {
  return std::log(std::max(1.0 - r_times_pd, kMissFloor));
}

double log_sum_exp(std::span<const double> xs) {
  double hi = -kInf;
  for (double x : xs) {
    hi = std::max(hi, x);
  }
  if (hi == -kInf) {
    return -kInf;
  }
  double s = 0.0;
  for (double x : xs) {
    s += std::exp(x - hi);
  }
  return hi + std::log(s);
}

double elapsed_ms(std::chrono::steady_clock::time_point from, std::chrono::steady_clock::time_point to) {
  return std::chrono::duration<double, std::milli>(to - from).count();
}

GaussianDensity with_wrapped_heading(GaussianDensity ue) {
  const double h = ue.mean()[kHeadingIndex];
  const double w = wrap_angle(h);
  if (w == h) {
    return ue;
  }
  Vector m = ue.mean();
  m[kHeadingIndex] = w;
  return {std::move(m), ue.cov()};
}

Matrix block_diagonal(const Matrix& block, std::size_t count) {
  const Eigen::Index n = block.rows();
  Matrix out = Matrix::Zero(n * static_cast<Eigen::Index>(count), n * static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    out.block(n * static_cast<Eigen::Index>(i), n * static_cast<Eigen::Index>(i), n, n) = block;
  }
  return out;
}

// Predicted measurement density of one (UE, landmark-kind) pair.
struct Predicted {
  Vector z;
  Eigen::LLT<Matrix> s_llt;
  double log_norm = 0.0;  // -0.5 log det(2 pi S)
  CircularMask circular;
  bool valid = false;

  [[nodiscard]] std::pair<double, double> loglik_and_maha(const Vector& meas) const {
    Vector e = meas - z;
    wrap_circular(e, circular);
    const Matrix l = s_llt.matrixL();
    const Vector w = l.triangularView<Eigen::Lower>().solve(e);
    const double maha = w.squaredNorm();
    return {log_norm - 0.5 * maha, maha};
  }
};

}  // namespace

Vector constant_turn_transition(const Vector& s, double speed, double turn_rate, double dt) {
  if (s.size() != kUeDim) {
    throw DimensionMismatch("constant_turn_transition: expected a 5-dim UE state");
  }
  Vector out = s;
  const double heading = s[kHeadingIndex];
  const double dh = turn_rate * dt;
  if (std::abs(turn_rate) < 1e-9) {
    out[0] += speed * dt * std::cos(heading);
    out[1] += speed * dt * std::sin(heading);
  } else {
    const double radius = speed / turn_rate;
    out[0] += radius * (std::sin(heading + dh) - std::sin(heading));
    out[1] += radius * (std::cos(heading) - std::cos(heading + dh));
  }
  out[kHeadingIndex] = wrap_angle(heading + dh);
  return out;
}

MotionModel constant_turn_motion(double speed, double turn_rate, double dt, Matrix q) {
  if (q.rows() != kUeDim || q.cols() != kUeDim) {
    throw DimensionMismatch("constant_turn_motion: Q must be 5x5");
  }
  ModelFunction v{[speed, turn_rate, dt](const Vector& s) { return constant_turn_transition(s, speed, turn_rate, dt); },
                  CircularMask{false, false, false, true, false}};
  return {std::move(v), std::move(q)};
}

GaussianDensity predict_ue(const GaussianDensity& ue, const MotionModel& motion) {
  const SlrStatistics stats = slr(motion.transition, ue).second;
  Matrix cov = stats.s_zz + motion.process_noise;
  return with_wrapped_heading(GaussianDensity(stats.z_pred, ensure_psd(0.5 * (cov + cov.transpose()), 0.0)));
}

GaussianDensity fuse_ue(std::span<const double> weights, std::span<const GaussianDensity> ues) {
  if (ues.empty()) {
    throw EmptyMixture("fuse_ue: no components");
  }
  const double ref = ues.front().mean()[kHeadingIndex];
  std::vector<GaussianDensity> unwrapped;
  unwrapped.reserve(ues.size());
  for (const auto& u : ues) {
    const double h = u.mean()[kHeadingIndex];
    const double aligned = ref + wrap_angle(h - ref);
    if (aligned == h) {
      unwrapped.push_back(u);
    } else {
      Vector m = u.mean();
      m[kHeadingIndex] = aligned;
      unwrapped.emplace_back(std::move(m), u.cov());
    }
  }
  return with_wrapped_heading(moment_match(weights, unwrapped));
}

AssociationTarget AssociationProblem::target_of(Eigen::Index column) const {
  if (column == bs_column()) {
    return {AssociationTarget::Type::Bs, 0};
  }
  const auto c = static_cast<std::size_t>(column - 1);
  if (c < num_bernoullis()) {
    return {AssociationTarget::Type::Bernoulli, c};
  }
  return {AssociationTarget::Type::NewOrClutter, 0};
}

PmbSlamFilter::PmbSlamFilter(std::shared_ptr<const MeasurementModel> model, SensorModel sensor,
                             MotionModel motion, FilterConfig config)
    : model_(std::move(model)), sensor_(std::move(sensor)), motion_(std::move(motion)), config_(config) {
  if (!model_) {
    throw InvalidArgument("PmbSlamFilter: null measurement model");
  }
  if (config_.gamma < 1) {
    throw InvalidArgument("PmbSlamFilter: gamma must be >= 1");
  }
}

GaussianDensity PmbSlamFilter::linearized_update(const ModelFunction& fn, const GaussianDensity& prior,
                                                 const Vector& z, const Matrix& r, int& iterations) const {
  if (config_.linearizer == Linearizer::Posterior) {
    IplfResult res = iplf(fn, prior, z, r, config_.iplf);
    iterations = res.iterations;
    return std::move(res.posterior);
  }
  iterations = 1;
  return ekf_update(fn, prior, z, r);
}

AssociationProblem PmbSlamFilter::build_cost_matrix(const GaussianDensity& ue_prior, const PmbMap& map,
                                                    std::span<const Measurement> z) const {
  const std::size_t n_b = map.bernoullis.size();
  const std::size_t n_z = z.size();
  const double p_d = sensor_.detection_prob;
  const Matrix& r = sensor_.noise_cov;

  AssociationProblem prob;
  prob.ue_prior = ue_prior;
  prob.first_new_id = map.next_id;
  prob.p_detect.assign(n_b, KindArray{p_d, p_d});
  prob.kind_loglik.assign(n_z, std::vector<KindArray>(n_b, KindArray{-kInf, -kInf}));
  prob.cost = CostMatrix::Constant(static_cast<Eigen::Index>(n_z), static_cast<Eigen::Index>(1 + n_b + n_z), kInf);

  auto predicted_for = [&](const GaussianDensity& joint, LandmarkKind kind) {
    Predicted pred;
    const ModelFunction h = stacked_measurement_fn(*model_, {kind});
    try {
      AffineApprox approx;
      if (config_.linearizer == Linearizer::Posterior) {
        approx = slr(h, joint).first;
      } else {
        approx = ekf_linearize(h, joint);
      }
      pred.z = approx.H * joint.mean() + approx.b;
      wrap_circular(pred.z, h.circular);
      Matrix s = approx.H * joint.cov() * approx.H.transpose() + approx.omega + r;
      pred.s_llt.compute(0.5 * (s + s.transpose()));
      if (pred.s_llt.info() != Eigen::Success) {
        return pred;
      }
      const Matrix l = pred.s_llt.matrixL();
      pred.log_norm = -l.diagonal().array().log().sum() -
                      0.5 * static_cast<double>(kMeasDim) * std::log(2.0 * std::numbers::pi);
      pred.circular = h.circular;
      pred.valid = true;
    } catch (const Error&) {
    }
    return pred;
  };

  const Vector ue_mean = ue_prior.mean();

  // Known BS: always exists, always in view.
  prob.log_miss_constant = log_miss(p_d);
  if (p_d > 0.0) {
    const std::array<GaussianDensity, 1> ue_only{ue_prior};
    const Predicted bs = predicted_for(stack_independent(ue_only), LandmarkKind::BS);
    if (bs.valid) {
      for (std::size_t j = 0; j < n_z; ++j) {
        const auto [ll, maha] = bs.loglik_and_maha(z[j].to_vector());
        if (maha <= config_.gate) {
          prob.cost(static_cast<Eigen::Index>(j), AssociationProblem::bs_column()) =
              -(std::log(p_d) + ll - log_miss(p_d));
        }
      }
    }
  }

  for (std::size_t i = 0; i < n_b; ++i) {
    const BernoulliComponent& b = map.bernoullis[i];
    double p_eff = 0.0;
    std::array<Predicted, kNumMapKinds> preds;
    for (LandmarkKind kind : kMapKinds) {
      const std::size_t k = kind_index(kind);
      if (!b.kind_densities[k] || b.kind_weights[k] <= 0.0) {
        continue;
      }
      const GaussianDensity& lm = *b.kind_densities[k];
      prob.p_detect[i][k] = model_->in_fov(lm.mean(), kind, ue_mean, sensor_) ? p_d : 0.0;
      p_eff += b.kind_weights[k] * prob.p_detect[i][k];
      if (prob.p_detect[i][k] > 0.0) {
        const std::array<GaussianDensity, 2> parts{ue_prior, lm};
        preds[k] = predicted_for(stack_independent(parts), kind);
      }
    }
    const double miss = log_miss(b.existence * p_eff);
    prob.log_miss_constant += miss;
    if (!(b.existence > 0.0) || !(p_eff > 0.0)) {
      continue;
    }
    for (std::size_t j = 0; j < n_z; ++j) {
      const Vector zj = z[j].to_vector();
      KindArray terms{-kInf, -kInf};
      for (std::size_t k = 0; k < kNumMapKinds; ++k) {
        if (!preds[k].valid) {
          continue;
        }
        const auto [ll, maha] = preds[k].loglik_and_maha(zj);
        if (maha > config_.gate) {
          continue;
        }
        prob.kind_loglik[j][i][k] = std::log(prob.p_detect[i][k]) + ll;
        terms[k] = std::log(b.kind_weights[k]) + prob.kind_loglik[j][i][k];
      }
      const double pair = log_sum_exp(terms);
      if (pair > -kInf) {
        prob.cost(static_cast<Eigen::Index>(j), prob.bernoulli_column(i)) = -(std::log(b.existence) + pair - miss);
      }
    }
  }

  prob.births.reserve(n_z);
  for (std::size_t j = 0; j < n_z; ++j) {
    prob.births.push_back(birth_bernoulli(z[j], ue_prior, map.ppp, sensor_, *model_, map.next_id + j));
    const double w = prob.births.back().weight;
    if (w > 0.0 && std::isfinite(w)) {
      prob.cost(static_cast<Eigen::Index>(j), prob.new_column(j)) = -std::log(w);
    }
  }
  return prob;
}

GlobalHypothesis PmbSlamFilter::to_hypothesis(const AssociationProblem& problem, const Assignment& assignment) const {
  GlobalHypothesis h;
  h.detected_flags.assign(problem.num_bernoullis(), false);
  h.assignment.reserve(assignment.row_to_col.size());
  for (int col : assignment.row_to_col) {
    const AssociationTarget t = problem.target_of(col);
    if (t.type == AssociationTarget::Type::Bernoulli) {
      h.detected_flags[t.index] = true;
    }
    h.assignment.push_back(t);
  }
  h.weight = std::exp(-assignment.cost + problem.log_miss_constant);
  return h;
}

HypothesisUpdate PmbSlamFilter::update_hypothesis(const AssociationProblem& problem, const PmbMap& map,
                                                  std::span<const Measurement> z,
                                                  const GlobalHypothesis& hypothesis) const {
  if (hypothesis.assignment.size() != z.size() || hypothesis.detected_flags.size() != map.bernoullis.size() ||
      problem.num_bernoullis() != map.bernoullis.size()) {
    throw DimensionMismatch("update_hypothesis: hypothesis does not match the problem");
  }
  HypothesisUpdate out;
  out.log_weight = problem.log_miss_constant;

  struct Detection {
    std::size_t meas;
    std::size_t bernoulli;  // unused for BS
    LandmarkKind kind;
    KindArray posterior_kind_weights{0.0, 0.0};
  };
  std::vector<Detection> detections;

  for (std::size_t j = 0; j < z.size(); ++j) {
    const AssociationTarget& t = hypothesis.assignment[j];
    const auto row = static_cast<Eigen::Index>(j);
    switch (t.type) {
      case AssociationTarget::Type::Bs: {
        const double c = problem.cost(row, AssociationProblem::bs_column());
        if (!std::isfinite(c)) {
          throw Infeasible("update_hypothesis: forbidden BS association");
        }
        out.log_weight -= c;
        detections.push_back({j, 0, LandmarkKind::BS});
        break;
      }
      case AssociationTarget::Type::Bernoulli: {
        const double c = problem.cost(row, problem.bernoulli_column(t.index));
        if (!std::isfinite(c)) {
          throw Infeasible("update_hypothesis: forbidden Bernoulli association");
        }
        out.log_weight -= c;
        const BernoulliComponent& b = map.bernoullis[t.index];
        KindArray terms{-kInf, -kInf};
        for (std::size_t k = 0; k < kNumMapKinds; ++k) {
          if (b.kind_weights[k] > 0.0) {
            terms[k] = std::log(b.kind_weights[k]) + problem.kind_loglik[j][t.index][k];
          }
        }
        const double norm = log_sum_exp(terms);
        Detection d{j, t.index, LandmarkKind::VA};
        for (std::size_t k = 0; k < kNumMapKinds; ++k) {
          d.posterior_kind_weights[k] = terms[k] > -kInf ? std::exp(terms[k] - norm) : 0.0;
        }
        d.kind = d.posterior_kind_weights[1] > d.posterior_kind_weights[0] ? LandmarkKind::SP : LandmarkKind::VA;
        detections.push_back(d);
        break;
      }
      case AssociationTarget::Type::NewOrClutter: {
        const double c = problem.cost(row, problem.new_column(j));
        if (!std::isfinite(c)) {
          throw Infeasible("update_hypothesis: measurement can be neither clutter nor a birth");
        }
        out.log_weight -= c;
        break;
      }
    }
  }

  // Joint prior [UE | detected landmarks in measurement order].
  std::vector<GaussianDensity> parts{problem.ue_prior};
  std::vector<LandmarkKind> kinds;
  Vector z_stacked(static_cast<Eigen::Index>(detections.size()) * kMeasDim);
  for (std::size_t d = 0; d < detections.size(); ++d) {
    const Detection& det = detections[d];
    kinds.push_back(det.kind);
    if (det.kind != LandmarkKind::BS) {
      parts.push_back(map.bernoullis[det.bernoulli].density(det.kind));
    }
    z_stacked.segment(static_cast<Eigen::Index>(d) * kMeasDim, kMeasDim) = z[det.meas].to_vector();
  }
  const GaussianDensity joint_prior = stack_independent(parts);

  GaussianDensity joint_post = joint_prior;
  if (!detections.empty()) {
    const ModelFunction fn = stacked_measurement_fn(*model_, kinds);
    const Matrix r = block_diagonal(sensor_.noise_cov, detections.size());
    joint_post = linearized_update(fn, joint_prior, z_stacked, r, out.iterations);
    if (config_.check_contraction) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(joint_prior.cov() - joint_post.cov(), Eigen::EigenvaluesOnly);
      out.min_contraction_eig = es.eigenvalues().minCoeff();
    }
  }
  out.ue = with_wrapped_heading(marginalize(joint_post, 0, kUeDim));
  out.joint = joint_post;

  // Bernoulli posteriors.
  std::vector<std::optional<BernoulliComponent>> updated(map.bernoullis.size());
  Eigen::Index at = kUeDim;
  for (const Detection& det : detections) {
    if (det.kind == LandmarkKind::BS) {
      continue;
    }
    const BernoulliComponent& prior_b = map.bernoullis[det.bernoulli];
    BernoulliComponent b = prior_b;
    b.existence = 1.0;
    b.kind_weights = det.posterior_kind_weights;
    const std::size_t map_k = kind_index(det.kind);
    b.kind_densities[map_k] = marginalize(joint_post, at, kLandmarkDim);
    at += kLandmarkDim;
    for (LandmarkKind kind : kMapKinds) {
      const std::size_t k = kind_index(kind);
      if (k == map_k) {
        continue;
      }
      if (!(b.kind_weights[k] >= config_.prune.kind_w_min) || !prior_b.kind_densities[k]) {
        b.kind_weights[k] = 0.0;
        b.kind_densities[k].reset();
        continue;
      }
      // Secondary kind: pairwise update against the UE prior, landmark marginal only.
      try {
        const std::array<GaussianDensity, 2> pair{problem.ue_prior, *prior_b.kind_densities[k]};
        int unused = 0;
        const GaussianDensity post = linearized_update(stacked_measurement_fn(*model_, {kind}),
                                                       stack_independent(pair), z[det.meas].to_vector(),
                                                       sensor_.noise_cov, unused);
        b.kind_densities[k] = marginalize(post, kUeDim, kLandmarkDim);
      } catch (const Error&) {
        b.kind_weights[k] = 0.0;
        b.kind_densities[k].reset();
      }
    }
    const double total = b.kind_weights[0] + b.kind_weights[1];
    for (double& w : b.kind_weights) {
      w /= total;
    }
    updated[det.bernoulli] = std::move(b);
  }

  out.map.bernoullis.reserve(map.bernoullis.size() + z.size());
  for (std::size_t i = 0; i < map.bernoullis.size(); ++i) {
    if (updated[i]) {
      out.map.bernoullis.push_back(std::move(*updated[i]));
    } else {
      out.map.bernoullis.push_back(misdetection_update(map.bernoullis[i], problem.p_detect[i]).bernoulli);
    }
  }
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (hypothesis.assignment[j].type == AssociationTarget::Type::NewOrClutter && problem.births[j].bernoulli) {
      out.map.bernoullis.push_back(*problem.births[j].bernoulli);
    }
  }
  return out;
}

StepResult PmbSlamFilter::step(const FilterState& state, std::span<const Measurement> z) const {
  using Clock = std::chrono::steady_clock;
  StepResult result;
  StepDiagnostics& diag = result.diagnostics;

  const auto t0 = Clock::now();
  const GaussianDensity ue_pred = predict_ue(state.ue, motion_);
  const PmbMap map_pred = predict_map(state.map);
  const auto t1 = Clock::now();

  const AssociationProblem problem = build_cost_matrix(ue_pred, map_pred, z);
  const std::vector<Assignment> ranked = murty_kbest(problem.cost, config_.gamma);

  std::vector<HypothesisUpdate> updates;
  updates.reserve(ranked.size());
  for (const Assignment& a : ranked) {
    try {
      updates.push_back(update_hypothesis(problem, map_pred, z, to_hypothesis(problem, a)));
    } catch (const Error&) {
      ++diag.dropped_hypotheses;
    }
  }
  if (updates.empty()) {
    throw NoFeasibleHypothesis("step " + std::to_string(state.step + 1) + ": every hypothesis update failed");
  }

  std::vector<double> log_w;
  log_w.reserve(updates.size());
  for (const auto& u : updates) {
    log_w.push_back(u.log_weight);
  }
  const double norm = log_sum_exp(log_w);
  std::vector<double> weights;
  weights.reserve(updates.size());
  for (double lw : log_w) {
    weights.push_back(std::isfinite(norm) ? std::exp(lw - norm) : 1.0 / static_cast<double>(log_w.size()));
  }
  // Exact renormalization so downstream sum-to-one checks hold to round-off.
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& w : weights) {
    w /= wsum;
  }

  std::vector<GaussianDensity> ues;
  std::vector<HypothesisMap> maps;
  ues.reserve(updates.size());
  maps.reserve(updates.size());
  int iter_sum = 0;
  int iter_count = 0;
  double min_eig = kInf;
  for (std::size_t h = 0; h < updates.size(); ++h) {
    ues.push_back(std::move(updates[h].ue));
    maps.push_back(HypothesisMap{weights[h], std::move(updates[h].map.bernoullis)});
    if (updates[h].iterations > 0) {
      iter_sum += updates[h].iterations;
      ++iter_count;
      min_eig = std::min(min_eig, updates[h].min_contraction_eig);
    }
  }

  FilterState& next = result.state;
  next.ue = fuse_ue(weights, ues);
  next.map = prune(pmbm_to_pmb(map_pred.ppp, maps, problem.first_new_id + z.size()), config_.prune);
  next.step = state.step + 1;
  const auto t2 = Clock::now();

  diag.predict_ms = elapsed_ms(t0, t1);
  diag.update_ms = elapsed_ms(t1, t2);
  diag.hypotheses = updates.size();
  diag.weights = std::move(weights);
  diag.mean_iterations = iter_count > 0 ? static_cast<double>(iter_sum) / iter_count : 0.0;
  diag.min_contraction_eig = iter_count > 0 ? min_eig : 0.0;
  return result;
}

}  // namespace iplpmb
