#include "mana/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mana {

std::size_t shape_numel(const Shape& shape)
{
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

namespace detail {

template <typename T>
void record(Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs, BackwardFn<T> fn)
{
    std::shared_ptr<TapeData<T>> tape;
    for (const Tensor<T>* in : inputs) {
        if (!in->tracked()) continue;
        auto t = in->live_tape();
        if (!t) continue;
        if (tape && tape != t) throw TapeError("operands are recorded on different tapes");
        tape = std::move(t);
    }
    if (!tape) return;
    if (tape->consumed) throw TapeError("cannot record onto a tape after backward()");

    TapeNode<T> node;
    node.numel = out.numel();
    node.backward = std::move(fn);
    node.inputs.reserve(inputs.size());
    for (const Tensor<T>* in : inputs) {
        node.inputs.push_back(in->tracked() && in->live_tape() == tape ? in->node_ : kNoNode);
    }
    tape->nodes.push_back(std::move(node));
    tape->grads.emplace_back();
    out.tape_ = tape;
    out.node_ = tape->nodes.size() - 1;
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op)
{
    for (T v : t.data()) {
        if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced a non-finite value");
    }
}

template void record<float>(Tensor<float>&, std::initializer_list<const Tensor<float>*>, BackwardFn<float>);
template void record<double>(Tensor<double>&, std::initializer_list<const Tensor<double>*>, BackwardFn<double>);
template void check_finite<float>(const Tensor<float>&, const char*);
template void check_finite<double>(const Tensor<double>&, const char*);

} // namespace detail

template <typename T>
Tensor<T> Gradients<T>::of(const Tensor<T>& t) const
{
    if (!t.tracked()) return Tensor<T>::zeros(t.shape());
    if (t.live_tape() != tape_) throw TapeError("tensor belongs to a different tape");
    const auto& g = tape_->grads[t.node_];
    if (g.empty()) return Tensor<T>::zeros(t.shape());
    return Tensor<T>(t.shape(), g);
}

template <typename T>
bool Gradients<T>::reached(const Tensor<T>& t) const
{
    if (!t.tracked() || t.live_tape() != tape_) return false;
    return !tape_->grads[t.node_].empty();
}

template <typename T>
Tape<T>::Tape() : data_(std::make_shared<detail::TapeData<T>>())
{
}

template <typename T>
void Tape<T>::watch(Tensor<T>& t)
{
    if (t.empty()) throw TapeError("cannot watch an empty tensor");
    if (data_->consumed) throw TapeError("cannot watch on a tape after backward()");
    if (t.tracked() && t.live_tape() == data_) return;
    detail::TapeNode<T> node;
    node.numel = t.numel();
    data_->nodes.push_back(std::move(node));
    data_->grads.emplace_back();
    t.tape_ = data_;
    t.node_ = data_->nodes.size() - 1;
}

template <typename T>
Gradients<T> Tape<T>::backward(const Tensor<T>& loss)
{
    if (data_->consumed) throw TapeError("backward() already ran on this tape; re-run the forward pass");
    if (loss.numel() != 1) throw TapeError("loss must be a scalar, got shape " + shape_string(loss.shape()));
    if (!loss.tracked() || loss.live_tape() != data_) throw TapeError("loss is not recorded on this tape");

    data_->consumed = true;
    data_->grad_buffer(loss.node_)[0] = T(1);
    for (std::size_t i = loss.node_ + 1; i-- > 0;) {
        auto& node = data_->nodes[i];
        if (!node.backward || data_->grads[i].empty()) continue;
        detail::GradSink<T> sink(*data_, node);
        node.backward(std::span<const T>(data_->grads[i]), sink);
        node.backward = nullptr;
        // Intermediate gradients are dead once propagated.
        if (i != loss.node_) std::vector<T>().swap(data_->grads[i]);
    }
    for (auto& node : data_->nodes) node.backward = nullptr;
    return Gradients<T>(data_);
}

template class Gradients<float>;
template class Gradients<double>;
template class Tape<float>;
template class Tape<double>;

} // namespace mana
