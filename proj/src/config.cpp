#include "spdagg/config.hpp"

#include <fstream>
#include <set>

#include "spdagg/errors.hpp"

namespace spdagg {

namespace {

using nlohmann::json;

template <typename T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ContractError("config: bad value for '" + key + "': " + e.what());
    }
}

std::size_t get_count(const json& j, const std::string& key) {
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ContractError("config: '" + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    if (!j.is_object()) throw ContractError("config: top level must be a JSON object");
    static const std::set<std::string> known = {
        "in_channels",      "mixed_channels", "transform_dim",   "num_classes",
        "use_spd_relu",     "aggregator",     "normalizations",  "lr_stage1",
        "lr_stage2",        "lr_stiefel",     "decay_factor",    "plateau_patience",
        "batch_size",       "epochs_per_stage", "seed",          "train_mix_in_stage1",
        "freeze_transform"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ContractError("config: unknown key '" + key + "'");
    }

    RunConfig rc;
    rc.given = j;
    PipelineConfig& p = rc.pipeline;
    TrainConfig& t = rc.train;
    if (j.contains("in_channels")) p.in_channels = get_count(j, "in_channels");
    if (j.contains("mixed_channels")) p.mixed_channels = get_count(j, "mixed_channels");
    if (j.contains("transform_dim")) p.transform_dim = get_count(j, "transform_dim");
    if (j.contains("num_classes")) p.num_classes = get_count(j, "num_classes");
    if (j.contains("use_spd_relu")) p.use_spd_relu = get_as<bool>(j, "use_spd_relu");
    if (j.contains("aggregator")) p.aggregator = aggregator_from_string(get_as<std::string>(j, "aggregator"));
    if (j.contains("normalizations")) {
        const json& n = j.at("normalizations");
        if (!n.is_object()) throw ContractError("config: 'normalizations' must be an object");
        for (const auto& [key, _] : n.items()) {
            if (key != "power" && key != "l2") {
                throw ContractError("config: unknown normalization '" + key + "'");
            }
        }
        if (n.contains("power")) p.normalizations.power = get_as<bool>(n, "power");
        if (n.contains("l2")) p.normalizations.l2 = get_as<bool>(n, "l2");
    }

    if (j.contains("lr_stage1")) t.lr_stage1 = get_as<double>(j, "lr_stage1");
    if (j.contains("lr_stage2")) t.lr_stage2 = get_as<double>(j, "lr_stage2");
    if (j.contains("lr_stiefel") && !j.at("lr_stiefel").is_null()) {
        t.lr_stiefel = get_as<double>(j, "lr_stiefel");
    }
    if (j.contains("decay_factor")) t.decay_factor = get_as<double>(j, "decay_factor");
    if (j.contains("plateau_patience")) t.plateau_patience = get_count(j, "plateau_patience");
    if (j.contains("batch_size")) t.batch_size = get_count(j, "batch_size");
    if (j.contains("epochs_per_stage")) t.epochs_per_stage = get_count(j, "epochs_per_stage");
    if (j.contains("seed")) t.seed = get_as<std::uint64_t>(j, "seed");
    if (j.contains("train_mix_in_stage1")) t.train_mix_in_stage1 = get_as<bool>(j, "train_mix_in_stage1");
    if (j.contains("freeze_transform")) t.freeze_transform = get_as<bool>(j, "freeze_transform");
    t.validate();
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ContractError("config '" + path + "': " + e.what());
    }
    return parse_run_config(j);
}

json to_json(const PipelineConfig& cfg) {
    return json{{"in_channels", cfg.in_channels},
                {"mixed_channels", cfg.mixed_channels},
                {"transform_dim", cfg.transform_dim},
                {"num_classes", cfg.num_classes},
                {"use_spd_relu", cfg.use_spd_relu},
                {"aggregator", to_string(cfg.aggregator)},
                {"normalizations", {{"power", cfg.normalizations.power}, {"l2", cfg.normalizations.l2}}}};
}

json to_json(const TrainConfig& tc) {
    json j{{"lr_stage1", tc.lr_stage1},
           {"lr_stage2", tc.lr_stage2},
           {"decay_factor", tc.decay_factor},
           {"plateau_patience", tc.plateau_patience},
           {"batch_size", tc.batch_size},
           {"epochs_per_stage", tc.epochs_per_stage},
           {"seed", tc.seed},
           {"train_mix_in_stage1", tc.train_mix_in_stage1},
           {"freeze_transform", tc.freeze_transform}};
    j["lr_stiefel"] = tc.lr_stiefel ? json(*tc.lr_stiefel) : json(nullptr);
    return j;
}

json to_json(const GradCheckReport& report) {
    json blocks = json::array();
    for (const auto& b : report.blocks) {
        blocks.push_back({{"name", b.name},
                          {"entries", b.entries},
                          {"max_rel_error", b.max_rel_error},
                          {"pass", b.pass}});
    }
    return json{{"tolerance", report.tolerance}, {"pass", report.pass()}, {"blocks", blocks}};
}

json to_json(const EpochMetrics& m) {
    json j{{"epoch", m.epoch},
           {"stage", m.stage},
           {"mean_train_loss", m.mean_train_loss},
           {"train_accuracy", m.train_accuracy},
           {"lr", m.lr},
           {"stiefel_orthogonality_error", m.stiefel_orthogonality_error},
           {"wall_ms", m.wall_ms}};
    j["test_accuracy"] = m.test_accuracy ? json(*m.test_accuracy) : json(nullptr);
    return j;
}

}  // namespace spdagg
