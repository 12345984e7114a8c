#pragma once

#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "hh/ad/tensor.hpp"

namespace hh::ad {

template <typename T>
class Tape;

/// Handle to a value recorded on a tape.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    const Tensor<T>& value() const;
    const Shape& shape() const { return value().shape; }
    std::size_t size() const { return value().size(); }
};

/// A reverse-mode recording. Nodes are appended in evaluation order, so the node list is a
/// topological order; backward walks it in reverse exactly once.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void()>;

    /// With `record_grad` false no backward closures are kept (inference mode).
    explicit Tape(bool record_grad = true) : record_(record_grad) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> constant(Tensor<T> value);
    /// A leaf whose gradient can be read back with grad() after backward.
    Var<T> input(Tensor<T> value);
    /// Leaf referencing a parameter; gradients are added into Parameter::grad by backward.
    Var<T> param(Parameter<T>& p);

    /// Seeds d(loss)/d(loss) = 1 and propagates. Loss must be a single element.
    void backward(Var<T> loss);
    /// Gradient of a leaf created with input(); empty if it received none.
    const std::vector<T>& grad(Var<T> v) const;

    bool recording() const { return record_; }
    bool consumed() const { return consumed_; }
    std::size_t node_count() const { return nodes_.size(); }

    // Op-implementation interface.
    const Tensor<T>& value(int id) const;
    bool requires_grad(int id) const { return nodes_[id].requires_grad; }
    /// Gradient buffer of a node, allocated (zeroed) on first access.
    std::span<T> grad_buffer(int id);
    bool any_requires_grad(std::initializer_list<int> ids) const;
    /// Appends an op result; `fn` is dropped unless recording and some parent requires grad.
    Var<T> push(const char* op, Tensor<T> value, bool needs_grad, BackwardFn fn);

private:
    struct Node {
        const char* op = "";
        Tensor<T> value;
        const Tensor<T>* external = nullptr;
        Parameter<T>* param = nullptr;
        std::vector<T> grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    bool record_;
    bool consumed_ = false;
    std::vector<Node> nodes_;
    std::unordered_map<const Parameter<T>*, int> param_nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
    return tape->value(id);
}

}  // namespace hh::ad
