#include "hh/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace hh::ad {

namespace {

double eval_loss(const LossFn& fn, ParamStore<double>& params) {
    Tape<double> tape(false);
    return fn(tape, params).value().data.at(0);
}

}  // namespace

GradCheckResult grad_check(const LossFn& fn, ParamStore<double>& params, double eps, int max_coords,
                           std::uint64_t seed, double abs_floor) {
    params.zero_grad();
    {
        Tape<double> tape;
        tape.backward(fn(tape, params));
    }

    std::vector<std::pair<Parameter<double>*, std::size_t>> coords;
    std::vector<const std::string*> names;
    for (auto& [name, p] : params.items())
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            coords.emplace_back(&p, i);
            names.push_back(&name);
        }
    std::vector<std::size_t> order(coords.size());
    std::iota(order.begin(), order.end(), 0);
    if (static_cast<int>(order.size()) > max_coords) {
        std::mt19937_64 rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
        order.resize(max_coords);
    }

    GradCheckResult result;
    for (std::size_t k : order) {
        auto [p, i] = coords[k];
        const double saved = p->value.data[i];
        p->value.data[i] = saved + eps;
        const double up = eval_loss(fn, params);
        p->value.data[i] = saved - eps;
        const double down = eval_loss(fn, params);
        p->value.data[i] = saved;
        const double numeric = (up - down) / (2 * eps);
        const double analytic = p->grad.empty() ? 0.0 : p->grad[i];
        const double rel =
            std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), abs_floor});
        if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_param = *names[k] + "[" + std::to_string(i) + "]";
        }
        ++result.coordinates;
    }
    return result;
}

}  // namespace hh::ad
