#include "medfinder/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "medfinder/common.hpp"
#include "medfinder/corpus.hpp"

namespace medfinder {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_keys(const ordered_json& obj, const std::set<std::string>& known,
                const std::string& context) {
    for (const auto& item : obj.items())
        if (!known.count(item.key()))
            throw ConfigError("unknown key '" + item.key() + "' in " + context);
}

AugmentationPolicy parse_policy(const ordered_json& j, const std::string& context) {
    check_keys(j, {"noise_sigma", "rotation_axis", "rotation_turns", "cutmix_fraction"},
               context);
    AugmentationPolicy p;
    if (j.contains("noise_sigma")) p.noise_sigma = j["noise_sigma"].get<double>();
    if (j.contains("rotation_axis"))
        p.rotation_axis = rotation_axis_from_name(j["rotation_axis"].get<std::string>());
    if (j.contains("rotation_turns")) p.rotation_turns = j["rotation_turns"].get<int>();
    if (j.contains("cutmix_fraction")) p.cutmix_fraction = j["cutmix_fraction"].get<double>();
    return p;
}

ordered_json policy_json(const AugmentationPolicy& p) {
    return ordered_json{{"noise_sigma", p.noise_sigma},
                        {"rotation_axis", rotation_axis_name(p.rotation_axis)},
                        {"rotation_turns", p.rotation_turns},
                        {"cutmix_fraction", p.cutmix_fraction}};
}

} // namespace

SamplerConfig RunConfig::sampler() const {
    SamplerConfig s;
    s.mode = sampler_mode_from_name(sampler_mode);
    s.length = sample_length;
    s.words = sample_words;
    return s;
}

LossConfig RunConfig::loss() const {
    LossConfig l;
    l.alpha = alpha;
    l.tau = tau;
    l.enable_mse = enable_mse;
    l.symmetric_sim = symmetric_sim;
    return l;
}

TrainConfig RunConfig::train() const {
    TrainConfig t;
    t.loss = loss();
    t.learning_rate = learning_rate;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.seed = seed;
    t.sampler = sampler();
    t.aug1 = aug1;
    t.aug2 = aug2;
    return t;
}

ModelConfig RunConfig::model(std::size_t vocab_size) const {
    ModelConfig m;
    m.vocab_size = vocab_size;
    m.embed_dim = embed_dim;
    m.patch_size = patch_size;
    return m;
}

void RunConfig::validate() const {
    if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (patch_size < 1) throw ConfigError("patch_size must be >= 1");
    for (std::size_t d : target_dims) {
        if (d < 1) throw ConfigError("target_dims entries must be >= 1");
        if (d % patch_size != 0)
            throw ConfigError("target_dims must be divisible by patch_size");
    }
    if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (sample_length < 1) throw ConfigError("sample_length must be >= 1");
    if (sample_words < 1) throw ConfigError("sample_words must be >= 1");
    sampler_mode_from_name(sampler_mode); // throws on unknown names
    if (keyword_pool != "labeled" && keyword_pool != "all")
        throw ConfigError("keyword_pool must be 'labeled' or 'all'");
    split_from_name(eval_split);
    auto check_policy = [](const AugmentationPolicy& p, const char* name) {
        if (p.noise_sigma < 0.0) throw ConfigError(std::string(name) + ".noise_sigma < 0");
        if (p.cutmix_fraction < 0.0 || p.cutmix_fraction >= 1.0)
            throw ConfigError(std::string(name) + ".cutmix_fraction out of [0,1)");
        if (p.rotation_turns < 0 || p.rotation_turns > 3)
            throw ConfigError(std::string(name) + ".rotation_turns out of [0,3]");
    };
    check_policy(aug1, "aug1");
    check_policy(aug2, "aug2");
}

std::string RunConfig::resolved_json() const {
    ordered_json j;
    j["manifest"] = manifest;
    j["volumes_root"] = volumes_root;
    j["vocab"] = vocab;
    j["patterns"] = patterns;
    j["stopwords"] = stopwords;
    j["checkpoint"] = checkpoint;
    j["history"] = history;
    j["embed_dim"] = embed_dim;
    j["patch_size"] = patch_size;
    j["target_dims"] = target_dims;
    j["alpha"] = alpha;
    j["tau"] = tau;
    j["learning_rate"] = learning_rate;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    j["sampler_mode"] = sampler_mode;
    j["sample_length"] = sample_length;
    j["sample_words"] = sample_words;
    j["enable_mse"] = enable_mse;
    j["symmetric_sim"] = symmetric_sim;
    j["encoder_variant"] = encoder_variant;
    j["aug1"] = policy_json(aug1);
    j["aug2"] = policy_json(aug2);
    j["keyword_pool"] = keyword_pool;
    j["eval_split"] = eval_split;
    return j.dump();
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad config JSON: " + std::string(e.what()));
    }
    static const std::set<std::string> known = {
        "manifest",      "volumes_root", "vocab",         "patterns",
        "stopwords",     "checkpoint",   "history",       "embed_dim",
        "patch_size",    "target_dims",  "alpha",         "tau",
        "learning_rate", "epochs",       "batch_size",    "seed",
        "sampler_mode",  "sample_length", "sample_words", "enable_mse",
        "symmetric_sim", "encoder_variant", "aug1",       "aug2",
        "keyword_pool",  "eval_split"};
    check_keys(j, known, "config");

    RunConfig cfg;
    try {
        if (j.contains("manifest")) cfg.manifest = j["manifest"].get<std::string>();
        if (j.contains("volumes_root")) cfg.volumes_root = j["volumes_root"].get<std::string>();
        if (j.contains("vocab")) cfg.vocab = j["vocab"].get<std::string>();
        if (j.contains("patterns")) cfg.patterns = j["patterns"].get<std::string>();
        if (j.contains("stopwords")) cfg.stopwords = j["stopwords"].get<std::string>();
        if (j.contains("checkpoint")) cfg.checkpoint = j["checkpoint"].get<std::string>();
        if (j.contains("history")) cfg.history = j["history"].get<std::string>();
        if (j.contains("embed_dim")) cfg.embed_dim = j["embed_dim"].get<std::size_t>();
        if (j.contains("patch_size")) cfg.patch_size = j["patch_size"].get<std::size_t>();
        if (j.contains("target_dims")) {
            const auto dims = j["target_dims"].get<std::vector<std::size_t>>();
            if (dims.size() != 3) throw ConfigError("target_dims must have three entries");
            cfg.target_dims = {dims[0], dims[1], dims[2]};
        }
        if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
        if (j.contains("tau")) cfg.tau = j["tau"].get<double>();
        if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("epochs")) cfg.epochs = j["epochs"].get<std::size_t>();
        if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("sampler_mode")) cfg.sampler_mode = j["sampler_mode"].get<std::string>();
        if (j.contains("sample_length"))
            cfg.sample_length = j["sample_length"].get<std::size_t>();
        if (j.contains("sample_words")) cfg.sample_words = j["sample_words"].get<std::size_t>();
        if (j.contains("enable_mse")) cfg.enable_mse = j["enable_mse"].get<bool>();
        if (j.contains("symmetric_sim")) cfg.symmetric_sim = j["symmetric_sim"].get<bool>();
        if (j.contains("encoder_variant"))
            cfg.encoder_variant = j["encoder_variant"].get<std::string>();
        if (j.contains("aug1")) cfg.aug1 = parse_policy(j["aug1"], "aug1");
        if (j.contains("aug2")) cfg.aug2 = parse_policy(j["aug2"], "aug2");
        if (j.contains("keyword_pool")) cfg.keyword_pool = j["keyword_pool"].get<std::string>();
        if (j.contains("eval_split")) cfg.eval_split = j["eval_split"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad config value: " + std::string(e.what()));
    }
    return cfg;
}

std::filesystem::path resolve_volumes_root(const RunConfig& cfg) {
    if (!cfg.volumes_root.empty()) return cfg.volumes_root;
    return std::filesystem::path(cfg.manifest).parent_path();
}

} // namespace medfinder
