#include "dmfnet/training.hpp"

#include <algorithm>
#include <cmath>

#include "dmfnet/random.hpp"

namespace dmfnet {

void adam_step(ModelParams& params, AdamState& state, double lr, const TrainConfig& cfg) {
  if (cfg.clip_norm > 0.0) {
    double sq = 0.0;
    for (auto& [name, p] : params.entries()) {
      const Tensor& g = p.grad();
      for (int64_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm) {
      const double scale = cfg.clip_norm / norm;
      for (auto& [name, p] : params.entries())
        for (auto& g : p.grad().vec()) g *= scale;
    }
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (auto& [name, p] : params.entries()) {
    const Tensor& g = p.grad();
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, Tensor::zeros(p.value().shape())).first;
      state.v.emplace(name, Tensor::zeros(p.value().shape()));
    }
    Tensor& m = mit->second;
    Tensor& v = state.v.at(name);
    if (!m.same_shape(p.value()))
      shape_error("adam_step: moment shape " + m.shape_str() + " disagrees with parameter " +
                  name + " " + p.value().shape_str());
    double* pv = p.value().data();
    double* mv = m.data();
    double* vv = v.data();
    for (int64_t i = 0; i < g.size(); ++i) {
      mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * g[i];
      vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = mv[i] / bc1;
      const double vhat = vv[i] / bc2;
      pv[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

LossReport train_epoch(CompletionModel& model, const std::vector<TrainSample>& data,
                       const TrainConfig& cfg, AdamState& state, int epoch) {
  if (data.empty()) shape_error("train_epoch: empty dataset");
  const int64_t n = static_cast<int64_t>(data.size());
  const std::vector<size_t> order =
      RandomStream(cfg.seed).fork(static_cast<uint64_t>(epoch)).permutation(data.size());

  const double lr = lr_at(epoch, cfg);
  LossReport sum;
  int64_t batch_index = 0;
  for (int64_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
    const int64_t end = std::min<int64_t>(start + cfg.batch_size, n);
    const double inv_batch = 1.0 / static_cast<double>(end - start);
    model.params().zero_grads();
    for (int64_t b = start; b < end; ++b) {
      const TrainSample& sample = data[order[static_cast<size_t>(b)]];
      Tape tape;
      ForwardTrace tr = model.forward(tape, sample.partial, sample.image);
      LossTerms terms = total_loss(tr.seed, tr.p1, tr.pc, sample.pyramid);
      const LossReport r = terms.report();
      if (!std::isfinite(r.total))
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      sum.cd_coarse += r.cd_coarse;
      sum.cd_intermediate += r.cd_intermediate;
      sum.cd_final += r.cd_final;
      sum.total += r.total;
      tape.backward(scalar_mul(terms.total, inv_batch));
    }
    adam_step(model.params(), state, lr, cfg);
  }

  const double inv = 1.0 / static_cast<double>(n);
  sum.cd_coarse *= inv;
  sum.cd_intermediate *= inv;
  sum.cd_final *= inv;
  sum.total *= inv;
  return sum;
}

EvalResult evaluate(const CompletionModel& model, const std::vector<TrainSample>& data,
                    double tau, bool use_gt) {
  EvalResult res;
  for (const TrainSample& sample : data) {
    SampleMetrics m;
    m.category = sample.category;
    const Tensor* pred = &sample.pyramid.ygt;
    CompletionModel::Stages stages;
    if (!use_gt) {
      stages = model.complete(sample.partial, sample.image);
      pred = &stages.pc;
    }
    m.l2 = cd_l2(*pred, sample.pyramid.ygt);
    m.l1 = cd_l1(*pred, sample.pyramid.ygt);
    m.f = f_score(*pred, sample.pyramid.ygt, tau);
    res.per_sample.push_back(m);

    CategoryMetrics& cat = res.per_category[m.category];
    cat.count += 1;
    cat.l2 += m.l2;
    cat.l1 += m.l1;
    cat.f += m.f;

    res.mean_l2 += m.l2;
    res.mean_l1 += m.l1;
    res.mean_f += m.f;
  }
  if (!res.per_sample.empty()) {
    const double inv = 1.0 / static_cast<double>(res.per_sample.size());
    res.mean_l2 *= inv;
    res.mean_l1 *= inv;
    res.mean_f *= inv;
  }
  for (auto& [name, cat] : res.per_category) {
    const double inv = 1.0 / static_cast<double>(cat.count);
    cat.l2 *= inv;
    cat.l1 *= inv;
    cat.f *= inv;
  }
  return res;
}

void quantize_to_f32(ModelParams& params, AdamState& state) {
  auto squash = [](Tensor& t) {
    for (auto& x : t.vec()) x = static_cast<double>(static_cast<float>(x));
  };
  for (auto& [name, p] : params.entries()) squash(p.value());
  for (auto& [name, m] : state.m) squash(m);
  for (auto& [name, v] : state.v) squash(v);
}

}  // namespace dmfnet
