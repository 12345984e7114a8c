#include "hh/ad/tensor.hpp"

#include <cmath>
#include <sstream>

#include "hh/error.hpp"

namespace hh::ad {

std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape s, T fill) : shape(std::move(s)), data(numel(shape), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (numel(shape) != data.size())
        throw ValidationError("tensor shape " + shape_str(shape) + " does not match " + std::to_string(data.size()) +
                              " values");
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!std::isfinite(data[i])) throw ValidationError("non-finite tensor value at index " + std::to_string(i));
}

template <typename T>
Parameter<T>& ParamStore<T>::create(const std::string& name, Shape shape) {
    if (params_.count(name)) throw UsageError("duplicate parameter name: " + name);
    auto& p = params_[name];
    p.value = Tensor<T>(std::move(shape));
    p.zero_grad();
    return p;
}

template <typename T>
Parameter<T>& ParamStore<T>::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw UsageError("unknown parameter: " + name);
    return it->second;
}

template <typename T>
const Parameter<T>& ParamStore<T>::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw UsageError("unknown parameter: " + name);
    return it->second;
}

template <typename T>
void ParamStore<T>::zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
}

template struct Tensor<float>;
template struct Tensor<double>;
template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace hh::ad
