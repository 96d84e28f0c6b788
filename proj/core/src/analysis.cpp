#include "catapult/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace catapult {

const char* to_string(Phase p) {
  switch (p) {
    case Phase::lazy: return "lazy";
    case Phase::catapult: return "catapult";
    case Phase::divergent: return "divergent";
    case Phase::non_converged: return "non_converged";
  }
  return "?";
}

Phase classify_phase(const Trajectory& trajectory, double spike_factor) {
  switch (trajectory.termination) {
    case Termination::diverged: return Phase::divergent;
    case Termination::step_limit: return Phase::non_converged;
    case Termination::converged: break;
  }
  const double l0 = trajectory.loss.front();
  return trajectory.max_loss() > spike_factor * l0 ? Phase::catapult : Phase::lazy;
}

GeneralizationReport generalization_report(const Vector& train_outputs, const Vector& train_labels,
                                           const Vector& test_outputs, const Vector& test_labels) {
  GeneralizationReport r;
  r.train_loss = mse_loss(train_outputs, train_labels);
  r.test_loss = mse_loss(test_outputs, test_labels);
  r.gap = r.test_loss - r.train_loss;
  Eigen::Index agree = 0;
  for (Eigen::Index a = 0; a < test_outputs.size(); ++a) {
    const auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
    if (sign(test_outputs(a)) == sign(test_labels(a))) ++agree;
  }
  r.accuracy = static_cast<double>(agree) / static_cast<double>(test_outputs.size());
  return r;
}

GeneralizationReport generalization_report(const Model& model, const Dataset& data) {
  if (!data.has_test()) throw InvalidInput("generalization_report: dataset has no test split");
  if (dynamic_cast<const QuadraticModel*>(&model) != nullptr)
    throw InvalidInput("generalization_report: quadratic models need explicit test outputs");
  Dataset test;
  test.inputs = *data.test_inputs;
  test.labels = *data.test_labels;
  return generalization_report(model.outputs(data), data.labels, model.outputs(test),
                               test.labels);
}

namespace {

double zero_fraction(const Matrix& post) {
  const Eigen::Index zeros = (post.array() == 0.0).count();
  return static_cast<double>(zeros) / static_cast<double>(post.size());
}

}  // namespace

std::vector<double> sparsity(const DeepReluNet& net, const Matrix& inputs) {
  std::vector<double> out;
  for (const Matrix& post : net.activations(inputs)) out.push_back(zero_fraction(post));
  return out;
}

std::vector<double> sparsity(const HomogenousNet& net, const Matrix& inputs) {
  if (!net.activation().is_relu()) throw InvalidInput("sparsity: needs a ReLU net");
  const Matrix pre = net.u() * inputs.transpose();
  return {zero_fraction(pre.cwiseMax(0.0))};
}

// ---------------------------------------------------------------------------

namespace {

SweepRecord run_one(const ModelFactory& factory, const Dataset& data, double eta, double lambda0,
                    const TrainConfig& base, const SweepOptions& options) {
  SweepRecord rec;
  rec.eta = eta;
  rec.eta_lambda0 = eta * lambda0;
  try {
    std::unique_ptr<Model> model = factory();
    TrainConfig cfg = base;
    cfg.eta = eta;
    Trajectory traj = train(*model, data, cfg);
    rec.termination = traj.termination;
    rec.steps_taken = traj.steps_taken;
    rec.phase = classify_phase(traj, options.spike_factor);
    rec.max_loss_ratio = traj.max_loss() / traj.loss.front();
    const double w0 = traj.weight_norm.front();
    double wmax = w0;
    for (double w : traj.weight_norm)
      if (std::isfinite(w)) wmax = std::max(wmax, w);
    rec.max_weight_ratio = wmax / w0;

    if (traj.termination != Termination::diverged) {
      rec.eta_lambda_final = eta * traj.final_lambda();
      rec.weight_ratio = traj.weight_norm.back() / w0;
      rec.train_loss_final = traj.loss.back();
      std::optional<GeneralizationReport> gen;
      if (options.test_outputs && data.has_test()) {
        gen = generalization_report(model->outputs(data), data.labels, options.test_outputs(*model),
                                    *data.test_labels);
      } else if (data.has_test() && dynamic_cast<const QuadraticModel*>(model.get()) == nullptr) {
        gen = generalization_report(*model, data);
      }
      if (gen) {
        rec.test_loss_final = gen->test_loss;
        rec.generalization_gap = gen->gap;
        rec.test_accuracy = gen->accuracy;
      }
      if (const auto* deep = dynamic_cast<const DeepReluNet*>(model.get()))
        rec.sparsity = sparsity(*deep, data.inputs);
      else if (const auto* net = dynamic_cast<const HomogenousNet*>(model.get());
               net != nullptr && net->activation().is_relu())
        rec.sparsity = sparsity(*net, data.inputs);
    }
    if (options.keep_trajectories) rec.trajectory = std::move(traj);
  } catch (const std::exception& e) {
    rec.status = e.what();
    rec.phase = Phase::non_converged;
  }
  return rec;
}

}  // namespace

SweepResult sweep(const ModelFactory& factory, const Dataset& data, const std::vector<double>& etas,
                  const TrainConfig& base, const SweepOptions& options) {
  if (etas.empty()) throw InvalidInput("sweep: empty eta grid");
  for (double eta : etas)
    if (!(std::isfinite(eta) && eta > 0.0)) throw InvalidInput("sweep: every eta must be > 0");
  data.validate();

  SweepResult result;
  {
    const std::unique_ptr<Model> probe = factory();
    result.lambda0 = ntk_lambda_max(*probe, data);
    result.theta0_sq = probe->weight_norm();
  }
  result.records.resize(etas.size());

  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(etas.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < etas.size(); ++i)
      result.records[i] = run_one(factory, data, etas[i], result.lambda0, base, options);
    return result;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < etas.size(); i = next++)
        result.records[i] = run_one(factory, data, etas[i], result.lambda0, base, options);
    });
  for (std::thread& t : workers) t.join();
  return result;
}

std::vector<double> resolve_eta_lambda0_grid(const std::vector<double>& grid, double lambda0) {
  if (!(lambda0 > 0.0)) throw InvalidInput("resolve_eta_lambda0_grid: lambda_max(H_0) must be > 0");
  std::vector<double> etas;
  etas.reserve(grid.size());
  for (double x : grid) etas.push_back(x / lambda0);
  return etas;
}

// ---------------------------------------------------------------------------

LinearizedPrediction linearized_predict(const Model& model, const Dataset& data, double eta,
                                        std::int64_t horizon, double fraction) {
  if (horizon < 0) throw InvalidInput("linearized_predict: horizon must be >= 0");
  LinearizedPrediction p;
  const EigenDecomposition eig = sym_eigen(model.ntk(data));
  p.eigenvalues = eig.values;
  p.eigenvectors = eig.vectors;
  const Vector eps0 = model.outputs(data) - data.labels;
  p.c0 = eig.vectors.transpose() * eps0;

  if (const auto* q = dynamic_cast<const QuadraticModel*>(&model))
    p.breakdown_scale =
        q->zeta() == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / q->zeta();
  else if (const auto* h = dynamic_cast<const HomogenousNet*>(&model))
    p.breakdown_scale = std::sqrt(static_cast<double>(h->width()));
  else if (const auto* d = dynamic_cast<const DeepReluNet*>(&model))
    p.breakdown_scale = std::sqrt(static_cast<double>(d->width()));
  else
    p.breakdown_scale = std::numeric_limits<double>::infinity();

  const double inv_2d = 0.5 / static_cast<double>(data.size());
  const Vector growth = (1.0 - eta * p.eigenvalues.array()).matrix();
  Vector c = p.c0;
  for (std::int64_t t = 0; t <= horizon; ++t) {
    const Vector e = t == 0 ? eps0 : Vector(eig.vectors * c);
    p.errors.push_back(e);
    p.loss.push_back(inv_2d * e.squaredNorm());
    c = (c.array() * growth.array()).matrix();
  }

  std::unique_ptr<Model> sim = model.clone();
  p.validity_horizon = horizon + 1;
  bool alive = true;
  for (std::int64_t t = 0; t <= horizon; ++t) {
    if (!alive) {
      p.true_loss.push_back(std::numeric_limits<double>::quiet_NaN());
      p.true_output_norm.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const Vector z = sim->outputs(data);
    p.true_loss.push_back(mse_loss(z, data.labels));
    p.true_output_norm.push_back(z.norm());
    if (p.validity_horizon == horizon + 1 && z.norm() >= fraction * p.breakdown_scale)
      p.validity_horizon = t;
    if (t < horizon) alive = gd_step(*sim, data, eta);
  }
  return p;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw InvalidInput("spearman: need two equal-length series of size >= 2");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a);
  const std::vector<double> rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace catapult
