#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mana/data.hpp"
#include "mana/model.hpp"
#include "mana/tensor.hpp"

namespace mana {

/// Mean absolute reconstruction error of the super-resolved frame.
template <typename T> Tensor<T> l1_loss(const Tensor<T>& output, const Tensor<T>& truth);

/// Mean absolute difference between the memory read and its query.
template <typename T> Tensor<T> memory_loss(const Tensor<T>& memory_read, const Tensor<T>& query);

struct AdamHyper {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.99;
    double eps = 1e-8;
};

template <typename T>
struct ParamGrad {
    std::string name;
    Tensor<T> grad;
};

/// Bias-corrected Adam over a fixed set of named parameters. Moments are
/// kept in double; parameters are updated in place.
template <typename T>
class AdamOptimizer {
public:
    AdamOptimizer(AdamHyper hyper, std::vector<NamedParam<T>> params);

    /// One update. grads must cover exactly the optimizer's parameters.
    void step(const std::vector<ParamGrad<T>>& grads);

    std::size_t steps() const noexcept { return steps_; }
    const AdamHyper& hyper() const noexcept { return hyper_; }

private:
    struct Slot {
        Tensor<T>* param;
        std::vector<double> m;
        std::vector<double> v;
    };

    AdamHyper hyper_;
    std::map<std::string, Slot> slots_;
    std::size_t steps_ = 0;
};

enum class LossKind {
    reconstruction,  // l1_loss of the network output against ground truth
    memory,          // memory_loss of the memory read against its query
};

struct StageSchedule {
    std::size_t iterations = 0;
    double lr = 1e-4;

    bool operator==(const StageSchedule&) const = default;
};

struct TrainingSchedule {
    std::array<StageSchedule, 3> stages{};
    /// Keep the memory fusion convolution at its initial value during stage 1.
    bool stage1_freeze_fusion_y = true;

    static TrainingSchedule desk();
    static TrainingSchedule paper();

    bool operator==(const TrainingSchedule&) const = default;
};

struct StagePlan {
    int stage = 1;
    std::vector<std::string> trainable;
    std::vector<std::string> frozen;
    LossKind loss = LossKind::reconstruction;
    std::size_t iterations = 0;
    double lr = 1e-4;
};

/// Trainable and frozen sets for stage 1, 2 or 3:
///   1: everything except the memory module (and fy unless switched off), L1
///   2: only the memory bank, memory loss
///   3: everything, L1
StagePlan make_stage_plan(const ModelConfig& cfg, int stage, const TrainingSchedule& schedule);

struct LossRecord {
    std::size_t iteration = 0;  // 1-based within its stage
    int stage = 1;
    double loss = 0;
};

/// Runs plan.iterations optimizer steps, one clip per step drawn by a seeded
/// shuffle of data. Parameters outside plan.trainable are never touched.
std::vector<LossRecord> run_stage(ManaModel<float>& model, const StagePlan& plan, const std::vector<Clip>& data,
                                  std::uint64_t seed);

struct TrainingLog {
    std::array<std::vector<LossRecord>, 3> stages;

    std::vector<LossRecord> all() const;
};

/// Stages 1, 2 and 3 in order, each with a fresh optimizer.
TrainingLog run_three_stage(ManaModel<float>& model, const TrainingSchedule& schedule, const std::vector<Clip>& data,
                            std::uint64_t seed);

/// CSV with header iteration,stage,loss.
std::string loss_csv(const std::vector<LossRecord>& records);

} // namespace mana
