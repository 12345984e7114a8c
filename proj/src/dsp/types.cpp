#include "hh/dsp/types.hpp"

#include <cmath>

#include "hh/dsp/fft.hpp"
#include "hh/error.hpp"
#include "hh/util.hpp"

namespace hh::dsp {

void Waveform::validate() const {
    if (sample_rate <= 0) throw ValidationError("sample_rate must be positive", "sample_rate");
    if (samples.empty()) throw ValidationError("waveform is empty", "samples");
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (!std::isfinite(samples[i]))
            throw ValidationError("non-finite sample at index " + std::to_string(i), "samples");
}

DspConfig DspConfig::reference() { return DspConfig{16000, 1024, 256, 1024, 80, 0.0, 8000.0, 1e-5}; }

DspConfig DspConfig::desk() { return DspConfig{8000, 512, 128, 512, 40, 0.0, 4000.0, 1e-5}; }

void DspConfig::validate() const {
    if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
    if (!is_power_of_two(n_fft)) throw ConfigError("n_fft must be a power of two");
    if (hop <= 0 || hop > win || win > n_fft) throw ConfigError("require 0 < hop <= win <= n_fft");
    if (n_mels <= 0) throw ConfigError("n_mels must be positive");
    if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0))
        throw ConfigError("require 0 <= f_min < f_max <= sample_rate/2");
    if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
}

std::string DspConfig::fingerprint() const {
    nlohmann::json j = *this;
    return hex64(fnv1a(j.dump()));
}

void to_json(nlohmann::json& j, const DspConfig& c) {
    j = nlohmann::json{{"sample_rate", c.sample_rate}, {"n_fft", c.n_fft}, {"hop", c.hop},
                       {"win", c.win},                 {"n_mels", c.n_mels}, {"f_min", c.f_min},
                       {"f_max", c.f_max},             {"log_floor", c.log_floor}};
}

void from_json(const nlohmann::json& j, DspConfig& c) {
    j.at("sample_rate").get_to(c.sample_rate);
    j.at("n_fft").get_to(c.n_fft);
    j.at("hop").get_to(c.hop);
    j.at("win").get_to(c.win);
    j.at("n_mels").get_to(c.n_mels);
    j.at("f_min").get_to(c.f_min);
    j.at("f_max").get_to(c.f_max);
    j.at("log_floor").get_to(c.log_floor);
}

}  // namespace hh::dsp
