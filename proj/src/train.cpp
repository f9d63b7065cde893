#include "mana/train.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "mana/ops.hpp"

namespace mana {

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& output, const Tensor<T>& truth)
{
    if (output.shape() != truth.shape()) {
        throw ShapeError("l1_loss: output " + shape_string(output.shape()) + " vs ground truth " +
                         shape_string(truth.shape()));
    }
    return mean_abs_diff(output, truth);
}

template <typename T>
Tensor<T> memory_loss(const Tensor<T>& memory_read, const Tensor<T>& query)
{
    if (memory_read.shape() != query.shape()) {
        throw ShapeError("memory_loss: memory read " + shape_string(memory_read.shape()) + " vs query " +
                         shape_string(query.shape()));
    }
    return mean_abs_diff(memory_read, query);
}

template <typename T>
AdamOptimizer<T>::AdamOptimizer(AdamHyper hyper, std::vector<NamedParam<T>> params) : hyper_(hyper)
{
    if (!(hyper.lr >= 0) || !(hyper.eps > 0) || hyper.beta1 < 0 || hyper.beta1 >= 1 || hyper.beta2 < 0 ||
        hyper.beta2 >= 1) {
        throw ConfigError("adam: lr >= 0, eps > 0 and betas in [0, 1) are required");
    }
    for (auto& p : params) {
        const std::size_t n = p.tensor->numel();
        if (!slots_.emplace(p.name, Slot{p.tensor, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}).second) {
            throw ConfigError("adam: parameter " + p.name + " registered twice");
        }
    }
}

template <typename T>
void AdamOptimizer<T>::step(const std::vector<ParamGrad<T>>& grads)
{
    std::set<std::string> seen;
    for (const auto& g : grads) {
        auto it = slots_.find(g.name);
        if (it == slots_.end()) throw TapeError("adam: " + g.name + " is not a trainable parameter of this stage");
        if (!seen.insert(g.name).second) throw TapeError("adam: duplicate gradient for " + g.name);
        if (g.grad.shape() != it->second.param->shape()) {
            throw ShapeError("adam: gradient " + shape_string(g.grad.shape()) + " does not match parameter " + g.name +
                             " " + shape_string(it->second.param->shape()));
        }
    }
    if (seen.size() != slots_.size()) throw TapeError("adam: missing gradients for some trainable parameters");

    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(hyper_.beta1, t);
    const double c2 = 1.0 - std::pow(hyper_.beta2, t);
    for (const auto& g : grads) {
        Slot& s = slots_.at(g.name);
        auto w = s.param->mutable_data();
        auto d = g.grad.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = static_cast<double>(d[i]);
            s.m[i] = hyper_.beta1 * s.m[i] + (1.0 - hyper_.beta1) * gi;
            s.v[i] = hyper_.beta2 * s.v[i] + (1.0 - hyper_.beta2) * gi * gi;
            const double m_hat = s.m[i] / c1;
            const double v_hat = s.v[i] / c2;
            w[i] = static_cast<T>(static_cast<double>(w[i]) - hyper_.lr * m_hat / (std::sqrt(v_hat) + hyper_.eps));
        }
    }
}

TrainingSchedule TrainingSchedule::desk()
{
    TrainingSchedule s;
    s.stages = {StageSchedule{500, 1e-4}, StageSchedule{200, 1e-2}, StageSchedule{200, 1e-5}};
    return s;
}

TrainingSchedule TrainingSchedule::paper()
{
    TrainingSchedule s;
    s.stages = {StageSchedule{90000, 1e-4}, StageSchedule{30000, 1e-4}, StageSchedule{30000, 1e-5}};
    return s;
}

StagePlan make_stage_plan(const ModelConfig& cfg, int stage, const TrainingSchedule& schedule)
{
    if (stage < 1 || stage > 3) throw ConfigError("stage must be 1, 2 or 3, got " + std::to_string(stage));
    const ManaModel<float> shape_only = make_model_skeleton<float>(cfg);
    std::vector<std::string> all;
    for (const auto& p : shape_only.parameters()) all.push_back(p.name);

    std::set<std::string> excluded;
    StagePlan plan;
    plan.stage = stage;
    plan.iterations = schedule.stages[static_cast<std::size_t>(stage - 1)].iterations;
    plan.lr = schedule.stages[static_cast<std::size_t>(stage - 1)].lr;
    if (stage == 1) {
        for (const auto& n : memory_module_parameters(cfg)) excluded.insert(n);
        if (schedule.stage1_freeze_fusion_y)
            for (const auto& n : memory_fusion_parameters()) excluded.insert(n);
        plan.loss = LossKind::reconstruction;
    } else if (stage == 2) {
        for (const auto& n : all)
            if (n != "memory.bank") excluded.insert(n);
        plan.loss = LossKind::memory;
    } else {
        plan.loss = LossKind::reconstruction;
    }
    for (const auto& n : all) (excluded.count(n) ? plan.frozen : plan.trainable).push_back(n);
    return plan;
}

namespace {

/// Endless stream of dataset indices: a fresh seeded Fisher-Yates
/// permutation per pass.
class ClipSampler {
public:
    ClipSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed)
    {
        for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        pos_ = n;
    }

    std::size_t next()
    {
        if (pos_ == order_.size()) {
            for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_() % i]);
            pos_ = 0;
        }
        return order_[pos_++];
    }

private:
    std::vector<std::size_t> order_;
    std::mt19937_64 rng_;
    std::size_t pos_;
};

std::uint64_t stage_seed(std::uint64_t seed, int stage)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(stage);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::vector<LossRecord> run_stage(ManaModel<float>& model, const StagePlan& plan, const std::vector<Clip>& data,
                                  std::uint64_t seed)
{
    std::vector<LossRecord> log;
    if (plan.iterations == 0) return log;
    if (data.empty()) throw DataError(DataError::Kind::insufficient_frames, "run_stage: empty dataset");

    std::vector<NamedParam<float>> trainable;
    {
        const std::set<std::string> wanted(plan.trainable.begin(), plan.trainable.end());
        for (auto& p : model.parameters())
            if (wanted.count(p.name)) trainable.push_back(p);
        if (trainable.size() != wanted.size()) throw ConfigError("stage plan names parameters the model does not have");
    }
    for (const auto& clip : data) {
        validate_clip(clip, model.config.frames);
        if (plan.loss == LossKind::reconstruction && !clip.hr_center) {
            throw DataError(DataError::Kind::unpaired, "clip " + clip.id + " has no ground truth for the L1 stage");
        }
    }

    AdamOptimizer<float> adam(AdamHyper{plan.lr}, trainable);
    ClipSampler sampler(data.size(), stage_seed(seed, plan.stage));
    log.reserve(plan.iterations);
    for (std::size_t it = 1; it <= plan.iterations; ++it) {
        const Clip& clip = data[sampler.next()];
        std::vector<ParamGrad<float>> grads;
        double loss_value = 0;
        {
            Tape<float> tape;
            for (auto& p : trainable) tape.watch(*p.tensor);
            Tensor<float> loss;
            if (plan.loss == LossKind::reconstruction) {
                loss = l1_loss(mana_forward(model, clip.lr_frames).output, *clip.hr_center);
            } else {
                const MemoryPath<float> path = memory_path(model, clip.lr_frames);
                loss = memory_loss(path.memory_read, path.query);
            }
            loss_value = loss.item();
            if (!std::isfinite(loss_value)) {
                throw NumericError("stage " + std::to_string(plan.stage) + " loss diverged at iteration " +
                                   std::to_string(it));
            }
            const Gradients<float> g = tape.backward(loss);
            for (auto& p : trainable) grads.push_back({p.name, g.of(*p.tensor)});
        }
        adam.step(grads);
        log.push_back({it, plan.stage, loss_value});
    }
    return log;
}

std::vector<LossRecord> TrainingLog::all() const
{
    std::vector<LossRecord> out;
    for (const auto& s : stages) out.insert(out.end(), s.begin(), s.end());
    return out;
}

TrainingLog run_three_stage(ManaModel<float>& model, const TrainingSchedule& schedule, const std::vector<Clip>& data,
                            std::uint64_t seed)
{
    TrainingLog log;
    for (int stage = 1; stage <= 3; ++stage) {
        const StagePlan plan = make_stage_plan(model.config, stage, schedule);
        log.stages[static_cast<std::size_t>(stage - 1)] = run_stage(model, plan, data, seed);
    }
    return log;
}

std::string loss_csv(const std::vector<LossRecord>& records)
{
    std::string out = "iteration,stage,loss\n";
    char buf[96];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%zu,%d,%.9g\n", r.iteration, r.stage, r.loss);
        out += buf;
    }
    return out;
}

template Tensor<float> l1_loss<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> l1_loss<double>(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> memory_loss<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> memory_loss<double>(const Tensor<double>&, const Tensor<double>&);
template class AdamOptimizer<float>;
template class AdamOptimizer<double>;

} // namespace mana
