#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace hh::ad {

using Shape = std::vector<int>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense row-major array. Values are checked finite on construction from data.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T{});
    Tensor(Shape s, std::vector<T> values);

    std::size_t size() const { return data.size(); }
    int dim(std::size_t i) const { return shape.at(i); }
    int rank() const { return static_cast<int>(shape.size()); }

    bool operator==(const Tensor&) const = default;
};

/// A trainable tensor with its accumulated gradient.
template <typename T>
struct Parameter {
    Tensor<T> value;
    std::vector<T> grad;

    void zero_grad() { grad.assign(value.size(), T{}); }
};

/// Named parameters in deterministic (lexicographic) order; element addresses are stable.
template <typename T>
class ParamStore {
public:
    Parameter<T>& create(const std::string& name, Shape shape);
    Parameter<T>& get(const std::string& name);
    const Parameter<T>& get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    std::map<std::string, Parameter<T>>& items() { return params_; }
    const std::map<std::string, Parameter<T>>& items() const { return params_; }

    void zero_grad();
    std::size_t scalar_count() const;

private:
    std::map<std::string, Parameter<T>> params_;
};

}  // namespace hh::ad
