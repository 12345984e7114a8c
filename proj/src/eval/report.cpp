#include "hh/eval/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "hh/error.hpp"

namespace hh::eval {

namespace {

const std::vector<std::string> kColumns = {"variant", "seed", "n_clips", "stft_l2", "envelope_l2", "frechet", "score_entropy",
                                           "agree_all", "agree_action", "agree_material"};

std::vector<std::string> row(const MetricReport& r) {
    auto num = [](double v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(4) << v;
        return s.str();
    };
    return {r.variant,
            std::to_string(r.seed),
            std::to_string(r.n_clips),
            num(r.stft_l2),
            num(r.envelope_l2),
            num(r.frechet_feature_distance),
            num(r.score_entropy),
            num(r.label_agreement_all),
            num(r.label_agreement_action),
            num(r.label_agreement_material)};
}

}  // namespace

void MetricReport::validate() const {
    for (const auto& [name, v] : {std::pair{"label_agreement_all", label_agreement_all},
                                  std::pair{"label_agreement_action", label_agreement_action},
                                  std::pair{"label_agreement_material", label_agreement_material}})
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]", name);
    for (const auto& [name, v] : {std::pair{"stft_l2", stft_l2}, std::pair{"envelope_l2", envelope_l2},
                                  std::pair{"frechet_feature_distance", frechet_feature_distance}})
        if (!(v >= 0.0 && std::isfinite(v))) throw ValidationError(std::string(name) + " must be finite and non-negative", name);
    if (!(score_entropy >= 1.0 - 1e-9 && std::isfinite(score_entropy)))
        throw ValidationError("score_entropy must be finite and at least 1", "score_entropy");
    if (n_clips < 0) throw ValidationError("n_clips must be non-negative", "n_clips");
}

void to_json(nlohmann::json& j, const MetricReport& r) {
    j = {{"variant", r.variant},
         {"seed", r.seed},
         {"stft_l2", r.stft_l2},
         {"envelope_l2", r.envelope_l2},
         {"frechet_feature_distance", r.frechet_feature_distance},
         {"score_entropy", r.score_entropy},
         {"label_agreement_all", r.label_agreement_all},
         {"label_agreement_action", r.label_agreement_action},
         {"label_agreement_material", r.label_agreement_material},
         {"n_clips", r.n_clips},
         {"config_hashes",
          {{"model", r.model_hash}, {"dataset", r.dataset_hash}, {"oracle", r.oracle_hash}, {"sample", r.sample_hash}}}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
    j.at("variant").get_to(r.variant);
    j.at("seed").get_to(r.seed);
    j.at("stft_l2").get_to(r.stft_l2);
    j.at("envelope_l2").get_to(r.envelope_l2);
    j.at("frechet_feature_distance").get_to(r.frechet_feature_distance);
    j.at("score_entropy").get_to(r.score_entropy);
    j.at("label_agreement_all").get_to(r.label_agreement_all);
    j.at("label_agreement_action").get_to(r.label_agreement_action);
    j.at("label_agreement_material").get_to(r.label_agreement_material);
    j.at("n_clips").get_to(r.n_clips);
    const auto& h = j.at("config_hashes");
    h.at("model").get_to(r.model_hash);
    h.at("dataset").get_to(r.dataset_hash);
    h.at("oracle").get_to(r.oracle_hash);
    h.at("sample").get_to(r.sample_hash);
}

std::string reports_csv(const std::vector<MetricReport>& reports) {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    };
    line(kColumns);
    for (const auto& r : reports) line(row(r));
    return out.str();
}

std::string reports_table(const std::vector<MetricReport>& reports) {
    std::vector<std::vector<std::string>> rows = {kColumns};
    for (const auto& r : reports) rows.push_back(row(r));
    std::vector<std::size_t> width(kColumns.size(), 0);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    std::ostringstream out;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i == 0)
                out << std::left << std::setw(int(width[i])) << r[i];
            else
                out << "  " << std::right << std::setw(int(width[i])) << r[i];
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace hh::eval
