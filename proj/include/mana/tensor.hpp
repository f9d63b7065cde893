#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mana/error.hpp"

namespace mana {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
class Tensor;
template <typename T>
class Tape;
template <typename T>
class Gradients;

namespace detail {

inline constexpr std::size_t kNoNode = static_cast<std::size_t>(-1);

template <typename T>
class GradSink;

template <typename T>
using BackwardFn = std::function<void(std::span<const T> grad_out, GradSink<T>& sink)>;

template <typename T>
struct TapeNode {
    std::vector<std::size_t> inputs;  // kNoNode for untracked inputs
    std::size_t numel = 0;
    BackwardFn<T> backward;           // empty for leaves
};

template <typename T>
struct TapeData {
    std::vector<TapeNode<T>> nodes;
    std::vector<std::vector<T>> grads;
    bool consumed = false;

    std::vector<T>& grad_buffer(std::size_t node)
    {
        auto& g = grads[node];
        if (g.empty()) g.assign(nodes[node].numel, T(0));
        return g;
    }
};

/// Hands a backward function the gradient accumulators of its inputs.
template <typename T>
class GradSink {
public:
    GradSink(TapeData<T>& tape, const TapeNode<T>& node) : tape_(tape), node_(node) {}

    /// Accumulator for input k, or nullptr when that input is not tracked.
    T* operator()(std::size_t k)
    {
        const std::size_t id = node_.inputs.at(k);
        if (id == kNoNode) return nullptr;
        return tape_.grad_buffer(id).data();
    }

    bool wants(std::size_t k) const { return node_.inputs.at(k) != kNoNode; }

private:
    TapeData<T>& tape_;
    const TapeNode<T>& node_;
};

template <typename T>
void record(Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs, BackwardFn<T> fn);

template <typename T>
void check_finite(const Tensor<T>& t, const char* op);

} // namespace detail

/// Dense row-major tensor. Copies share storage; writes go through
/// mutable_data(), which detaches shared storage first.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0))
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<T>>(shape_numel(shape_), fill))
    {
    }

    Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape))
    {
        if (values.size() != shape_numel(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(values.size()) +
                             " does not match shape " + shape_string(shape_));
        }
        data_ = std::make_shared<std::vector<T>>(std::move(values));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
    static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }
    static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }
    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape(), T(0)); }

    bool empty() const noexcept { return !data_; }
    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t numel() const noexcept { return data_ ? data_->size() : 0; }

    std::span<const T> data() const& noexcept
    {
        return data_ ? std::span<const T>(*data_) : std::span<const T>();
    }
    // A span into a temporary would dangle.
    std::span<const T> data() const&& = delete;

    std::span<T> mutable_data() &
    {
        if (!data_) return {};
        if (data_.use_count() > 1) data_ = std::make_shared<std::vector<T>>(*data_);
        return std::span<T>(*data_);
    }

    T operator[](std::size_t i) const { return (*data_)[i]; }
    T item() const
    {
        if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
        return (*data_)[0];
    }

    /// True when this value participates in a live tape.
    bool tracked() const noexcept { return node_ != detail::kNoNode && !tape_.expired(); }

    /// Same values, no tape association.
    Tensor detach() const
    {
        Tensor out;
        out.shape_ = shape_;
        out.data_ = data_;
        return out;
    }

    template <typename U>
    Tensor<U> cast() const
    {
        std::vector<U> values(numel());
        for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<U>((*data_)[i]);
        return Tensor<U>(shape_, std::move(values));
    }

    bool same_values(const Tensor& other) const
    {
        return shape_ == other.shape_ && (data_ == other.data_ || (data_ && other.data_ && *data_ == *other.data_));
    }

private:
    friend class Tape<T>;
    friend class Gradients<T>;
    friend void detail::record<T>(Tensor<T>&, std::initializer_list<const Tensor<T>*>, detail::BackwardFn<T>);

    std::shared_ptr<detail::TapeData<T>> live_tape() const { return tape_.lock(); }

    Shape shape_;
    std::shared_ptr<std::vector<T>> data_;
    std::weak_ptr<detail::TapeData<T>> tape_;
    std::size_t node_ = detail::kNoNode;
};

/// Gradients produced by one backward pass, keyed by the tracked tensor.
template <typename T>
class Gradients {
public:
    Gradients() = default;
    explicit Gradients(std::shared_ptr<detail::TapeData<T>> tape) : tape_(std::move(tape)) {}

    /// Gradient of the loss with respect to t. Untracked tensors and tensors
    /// the loss does not depend on get zeros.
    Tensor<T> of(const Tensor<T>& t) const;

    /// Whether any gradient reached t.
    bool reached(const Tensor<T>& t) const;

private:
    friend class Tape<T>;
    std::shared_ptr<detail::TapeData<T>> tape_;
};

/// Define-by-run recording of differentiable ops. One tape per training
/// step; discard it afterwards. Tensors recorded on a destroyed tape become
/// untracked again.
template <typename T>
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) noexcept = default;
    Tape& operator=(Tape&&) noexcept = default;

    /// Register t as a differentiable leaf on this tape.
    void watch(Tensor<T>& t);

    /// Reverse sweep from a scalar loss. May run at most once per tape.
    Gradients<T> backward(const Tensor<T>& loss);

    std::size_t size() const noexcept { return data_->nodes.size(); }

private:
    friend class Gradients<T>;
    std::shared_ptr<detail::TapeData<T>> data_;
};

} // namespace mana
