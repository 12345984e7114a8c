#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hh::eval {

struct MetricReport {
    std::string variant;
    std::uint64_t seed = 0;
    double stft_l2 = 0.0;
    double envelope_l2 = 0.0;
    double frechet_feature_distance = 0.0;
    double score_entropy = 0.0;
    double label_agreement_all = 0.0;
    double label_agreement_action = 0.0;
    double label_agreement_material = 0.0;
    int n_clips = 0;
    std::string model_hash;
    std::string dataset_hash;
    std::string oracle_hash;
    std::string sample_hash;

    /// Throws ValidationError if an agreement is outside [0, 1] or a distance is negative or non-finite.
    void validate() const;
};

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

/// One row per report, header first.
std::string reports_csv(const std::vector<MetricReport>& reports);
/// Column-aligned text of the same table.
std::string reports_table(const std::vector<MetricReport>& reports);

}  // namespace hh::eval
