#include "hh/ad/tape.hpp"

#include <cmath>

#include "hh/error.hpp"

namespace hh::ad {

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var<T> Tape<T>::input(Tensor<T> value) {
    Node n;
    n.op = "input";
    n.value = std::move(value);
    n.requires_grad = record_;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var<T> Tape<T>::param(Parameter<T>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    Node n;
    n.op = "param";
    n.external = &p.value;
    n.param = &p;
    n.requires_grad = record_;
    nodes_.push_back(std::move(n));
    const int id = static_cast<int>(nodes_.size()) - 1;
    param_nodes_[&p] = id;
    return {this, id};
}

template <typename T>
const Tensor<T>& Tape<T>::value(int id) const {
    const auto& n = nodes_[id];
    return n.external ? *n.external : n.value;
}

template <typename T>
std::span<T> Tape<T>::grad_buffer(int id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(value(id).size(), T{});
    return n.grad;
}

template <typename T>
bool Tape<T>::any_requires_grad(std::initializer_list<int> ids) const {
    if (!record_) return false;
    for (int id : ids)
        if (nodes_[id].requires_grad) return true;
    return false;
}

template <typename T>
Var<T> Tape<T>::push(const char* op, Tensor<T> value, bool needs_grad, BackwardFn fn) {
    for (const T& v : value.data)
        if (!std::isfinite(v)) throw ValidationError(std::string("non-finite value produced by op '") + op + "'");
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.requires_grad = record_ && needs_grad;
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
    if (!record_) throw UsageError("backward on a tape created without gradient recording");
    if (consumed_) throw UsageError("backward already ran on this recording");
    if (loss.tape != this) throw UsageError("loss belongs to a different recording");
    if (value(loss.id).size() != 1)
        throw UsageError("backward requires a scalar loss, got shape " + shape_str(value(loss.id).shape));
    consumed_ = true;
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss.id)[0] = T{1};
    for (int id = loss.id; id >= 0; --id) {
        auto& n = nodes_[id];
        if (!n.requires_grad || n.grad.empty()) continue;
        if (n.backward) n.backward();
        if (n.param) {
            auto& pg = n.param->grad;
            if (pg.size() != n.grad.size()) pg.assign(n.grad.size(), T{});
            for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
        }
    }
}

template <typename T>
const std::vector<T>& Tape<T>::grad(Var<T> v) const {
    return nodes_[v.id].grad;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace hh::ad
