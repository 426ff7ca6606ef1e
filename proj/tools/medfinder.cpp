// medfinder CLI: curate, split, stats, vocab, synth, train, embed, eval, query.
// Logs (including the resolved config) go to stderr; data goes to files or
// stdout. Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric divergence.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "medfinder/common.hpp"
#include "medfinder/config.hpp"
#include "medfinder/corpus.hpp"
#include "medfinder/fusion.hpp"
#include "medfinder/pipeline.hpp"
#include "medfinder/retrieval.hpp"
#include "medfinder/synth.hpp"
#include "medfinder/text.hpp"
#include "medfinder/training.hpp"
#include "medfinder/volume.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace medfinder;

namespace {

void log_config(const RunConfig& cfg) {
    std::cerr << "config: " << cfg.resolved_json() << "\n";
    std::cerr << "seed: " << cfg.seed << "\n";
}

void require_input(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string(what) + " path not configured");
    if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw DataError("cannot write output: " + path);
    return file;
}

// Gathers per-command flag overrides on top of an optional config file.
// Only flags the user actually passed win over file values.
struct ConfigCli {
    std::string config_path;
    RunConfig flags;
    std::vector<std::size_t> target_dims_flag;

    CLI::Option* o_manifest = nullptr;
    CLI::Option* o_volumes_root = nullptr;
    CLI::Option* o_vocab = nullptr;
    CLI::Option* o_patterns = nullptr;
    CLI::Option* o_stopwords = nullptr;
    CLI::Option* o_checkpoint = nullptr;
    CLI::Option* o_history = nullptr;
    CLI::Option* o_embed_dim = nullptr;
    CLI::Option* o_patch_size = nullptr;
    CLI::Option* o_target_dims = nullptr;
    CLI::Option* o_alpha = nullptr;
    CLI::Option* o_tau = nullptr;
    CLI::Option* o_lr = nullptr;
    CLI::Option* o_epochs = nullptr;
    CLI::Option* o_batch = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_sampler = nullptr;
    CLI::Option* o_sample_length = nullptr;
    CLI::Option* o_sample_words = nullptr;
    CLI::Option* o_enable_mse = nullptr;
    CLI::Option* o_symmetric = nullptr;
    CLI::Option* o_variant = nullptr;
    CLI::Option* o_keyword_pool = nullptr;
    CLI::Option* o_eval_split = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run config file");
        o_manifest = cmd->add_option("--manifest", flags.manifest, "manifest path");
        o_volumes_root =
            cmd->add_option("--volumes-root", flags.volumes_root, "volume file root");
        o_vocab = cmd->add_option("--vocab", flags.vocab, "vocabulary file");
        o_patterns = cmd->add_option("--patterns", flags.patterns, "anonymization patterns");
        o_stopwords = cmd->add_option("--stopwords", flags.stopwords, "stopword file");
        o_checkpoint = cmd->add_option("--checkpoint", flags.checkpoint, "checkpoint path");
        o_history = cmd->add_option("--history", flags.history, "loss history output");
        o_embed_dim = cmd->add_option("--embed-dim", flags.embed_dim, "embedding dim");
        o_patch_size = cmd->add_option("--patch-size", flags.patch_size, "vision patch size");
        o_target_dims = cmd->add_option("--target-dims", target_dims_flag,
                                        "standard volume size W H D")
                            ->expected(3);
        o_alpha = cmd->add_option("--alpha", flags.alpha, "contrastive loss weight");
        o_tau = cmd->add_option("--tau", flags.tau, "softmax temperature");
        o_lr = cmd->add_option("--learning-rate", flags.learning_rate, "SGD step size");
        o_epochs = cmd->add_option("--epochs", flags.epochs, "training epochs");
        o_batch = cmd->add_option("--batch-size", flags.batch_size, "mini-batch size");
        o_seed = cmd->add_option("--seed", flags.seed, "run seed");
        o_sampler = cmd->add_option("--sampler-mode", flags.sampler_mode,
                                    "contiguous | random_words | off");
        o_sample_length = cmd->add_option("--sample-length", flags.sample_length,
                                          "contiguous window length L");
        o_sample_words =
            cmd->add_option("--sample-words", flags.sample_words, "random word count M");
        o_enable_mse = cmd->add_flag("--enable-mse,!--disable-mse", flags.enable_mse,
                                     "toggle view-consistency loss");
        o_symmetric = cmd->add_flag("--symmetric-sim", flags.symmetric_sim,
                                    "add the text-direction contrastive term");
        o_variant = cmd->add_option("--encoder-variant", flags.encoder_variant,
                                    "frozen text encoder variant");
        o_keyword_pool =
            cmd->add_option("--keyword-pool", flags.keyword_pool, "labeled | all");
        o_eval_split = cmd->add_option("--eval-split", flags.eval_split, "split to evaluate");
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path.empty()) {
            if (!fs::exists(config_path))
                throw ConfigError("config file not found: " + config_path);
            cfg = load_run_config(config_path);
        }
        if (*o_manifest) cfg.manifest = flags.manifest;
        if (*o_volumes_root) cfg.volumes_root = flags.volumes_root;
        if (*o_vocab) cfg.vocab = flags.vocab;
        if (*o_patterns) cfg.patterns = flags.patterns;
        if (*o_stopwords) cfg.stopwords = flags.stopwords;
        if (*o_checkpoint) cfg.checkpoint = flags.checkpoint;
        if (*o_history) cfg.history = flags.history;
        if (*o_embed_dim) cfg.embed_dim = flags.embed_dim;
        if (*o_patch_size) cfg.patch_size = flags.patch_size;
        if (*o_target_dims)
            cfg.target_dims = {target_dims_flag[0], target_dims_flag[1], target_dims_flag[2]};
        if (*o_alpha) cfg.alpha = flags.alpha;
        if (*o_tau) cfg.tau = flags.tau;
        if (*o_lr) cfg.learning_rate = flags.learning_rate;
        if (*o_epochs) cfg.epochs = flags.epochs;
        if (*o_batch) cfg.batch_size = flags.batch_size;
        if (*o_seed) cfg.seed = flags.seed;
        if (*o_sampler) cfg.sampler_mode = flags.sampler_mode;
        if (*o_sample_length) cfg.sample_length = flags.sample_length;
        if (*o_sample_words) cfg.sample_words = flags.sample_words;
        if (*o_enable_mse) cfg.enable_mse = flags.enable_mse;
        if (*o_symmetric) cfg.symmetric_sim = flags.symmetric_sim;
        if (*o_variant) cfg.encoder_variant = flags.encoder_variant;
        if (*o_keyword_pool) cfg.keyword_pool = flags.keyword_pool;
        if (*o_eval_split) cfg.eval_split = flags.eval_split;
        cfg.validate();
        return cfg;
    }
};

// --- curate -----------------------------------------------------------------

struct CurateArgs {
    std::string raw_dir;
    std::string out_manifest;
    std::string log_path;
};

void run_curate(const CurateArgs& args, const RunConfig& cfg) {
    if (!fs::is_directory(args.raw_dir))
        throw DataError("raw directory not readable: " + args.raw_dir);

    std::optional<Anonymizer> anonymizer;
    if (!cfg.patterns.empty()) {
        require_input(cfg.patterns, "patterns file");
        anonymizer.emplace(load_patterns(cfg.patterns));
    }

    // Union of stems; a sample needs both its volume and its report.
    std::set<std::string> stems;
    for (const auto& entry : fs::directory_iterator(args.raw_dir)) {
        if (!entry.is_regular_file()) continue;
        const fs::path p = entry.path();
        if (p.extension() == ".vol" || p.extension() == ".txt")
            stems.insert(p.stem().string());
    }
    if (stems.empty()) throw DataError("no corpus files in " + args.raw_dir);

    const fs::path manifest_dir = fs::absolute(args.out_manifest).parent_path();
    Manifest manifest;
    std::vector<std::pair<std::string, RejectReason>> rejections;

    for (const std::string& stem : stems) {
        const fs::path vol_path = fs::path(args.raw_dir) / (stem + ".vol");
        const fs::path txt_path = fs::path(args.raw_dir) / (stem + ".txt");
        if (!fs::exists(vol_path) || !fs::exists(txt_path)) {
            rejections.emplace_back(stem, RejectReason::unpaired);
            continue;
        }

        const Volume volume = load_volume(vol_path);
        VolumeRecord vr;
        vr.id = stem;
        vr.width = volume.width;
        vr.height = volume.height;
        vr.depth = volume.depth;
        vr.missing_fraction = missing_fraction(volume);
        vr.data_path = fs::relative(fs::absolute(vol_path), manifest_dir).generic_string();
        const FilterDecision vd = filter_volume(vr);
        if (!vd.keep) {
            rejections.emplace_back(stem, vd.reason);
            continue;
        }

        std::ifstream txt(txt_path, std::ios::binary);
        std::string text((std::istreambuf_iterator<char>(txt)),
                         std::istreambuf_iterator<char>());
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
        ReportRecord rr;
        rr.id = stem;
        rr.text = text;
        rr.word_count = whitespace_word_count(text);
        const FilterDecision rd = filter_report(rr);
        if (!rd.keep) {
            rejections.emplace_back(stem, rd.reason);
            continue;
        }

        if (anonymizer) {
            rr.text = anonymizer->apply(rr.text);
            rr.word_count = whitespace_word_count(rr.text);
        }

        PairedSample sample;
        sample.id = stem;
        sample.volume = vr;
        sample.report = rr;
        const fs::path kw_path = fs::path(args.raw_dir) / (stem + ".keywords");
        if (fs::exists(kw_path)) {
            std::ifstream kw(kw_path);
            std::string line;
            while (std::getline(kw, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty()) continue;
                std::transform(line.begin(), line.end(), line.begin(), [](unsigned char c) {
                    return static_cast<char>(std::tolower(c));
                });
                sample.keywords.insert(line);
            }
        }
        manifest.samples.push_back(std::move(sample));
    }

    if (manifest.samples.empty())
        throw DataError("curation rejected every sample in " + args.raw_dir);
    std::sort(manifest.samples.begin(), manifest.samples.end(),
              [](const PairedSample& a, const PairedSample& b) { return a.id < b.id; });
    save_manifest(args.out_manifest, manifest);

    std::ofstream log_file;
    std::ostream& log = open_output(log_file, args.log_path);
    for (const auto& [id, reason] : rejections)
        log << id << '\t' << reject_reason_name(reason) << '\n';
    std::cerr << "kept " << manifest.samples.size() << " samples, rejected "
              << rejections.size() << "\n";
}

// --- train / embed / eval / query --------------------------------------------

void run_train(const RunConfig& cfg) {
    require_input(cfg.manifest, "manifest");
    require_input(cfg.vocab, "vocabulary");
    if (cfg.checkpoint.empty()) throw ConfigError("checkpoint output path not configured");

    const Manifest manifest = load_manifest(cfg.manifest);
    const Vocabulary vocab = Vocabulary::load(cfg.vocab);
    const ModelConfig model = cfg.model(vocab.size());
    const std::vector<TrainItem> items = load_train_items(
        manifest, Split::train, resolve_volumes_root(cfg), vocab, cfg.target_dims);

    EncoderParams params = init_encoder_params(model, cfg.seed, cfg.encoder_variant);
    TrainResult result = train(items, std::move(params), model, cfg.train());
    result.params.save(cfg.checkpoint);

    std::ofstream history_file;
    std::ostream& out = open_output(history_file, cfg.history);
    for (std::size_t e = 0; e < result.history.size(); ++e) {
        const LossBreakdown& l = result.history[e];
        ordered_json j{{"epoch", e}, {"l_mse", l.l_mse}, {"l_sim", l.l_sim},
                       {"l_total", l.l_total}, {"alpha", l.alpha}};
        out << j.dump() << '\n';
    }
    std::cerr << "trained " << items.size() << " items for " << cfg.epochs
              << " epochs; final l_total = " << result.history.back().l_total << "\n";
}

struct EmbedArgs {
    std::string out_images;
    std::string out_texts;
    std::string split;
};

void run_embed(const EmbedArgs& args, const RunConfig& cfg) {
    if (args.out_images.empty() && args.out_texts.empty())
        throw ConfigError("embed needs --out-images and/or --out-texts");
    require_input(cfg.manifest, "manifest");
    require_input(cfg.vocab, "vocabulary");
    require_input(cfg.checkpoint, "checkpoint");

    const Manifest manifest = load_manifest(cfg.manifest);
    const Vocabulary vocab = Vocabulary::load(cfg.vocab);
    const EncoderParams params = EncoderParams::load(cfg.checkpoint);
    const Split split = split_from_name(args.split.empty() ? cfg.eval_split : args.split);
    const EmbeddedCorpus corpus =
        embed_split(manifest, split, resolve_volumes_root(cfg), vocab, params,
                    cfg.model(vocab.size()), cfg.target_dims, cfg.sample_length);
    if (!args.out_images.empty()) save_embeddings(args.out_images, corpus.ids, corpus.image);
    if (!args.out_texts.empty()) save_embeddings(args.out_texts, corpus.ids, corpus.text);
    std::cerr << "embedded " << corpus.ids.size() << " samples from split '"
              << split_name(split) << "'\n";
}

struct EvalArgs {
    std::string out;
    bool table = false;
};

void run_eval(const EvalArgs& args, const RunConfig& cfg) {
    require_input(cfg.manifest, "manifest");
    require_input(cfg.vocab, "vocabulary");
    require_input(cfg.checkpoint, "checkpoint");

    const Manifest manifest = load_manifest(cfg.manifest);
    const Vocabulary vocab = Vocabulary::load(cfg.vocab);
    const EncoderParams params = EncoderParams::load(cfg.checkpoint);
    EvalOptions options;
    options.keyword_pool_all = cfg.keyword_pool == "all";
    const MetricsReport report = evaluate_split(
        manifest, split_from_name(cfg.eval_split), resolve_volumes_root(cfg), vocab, params,
        cfg.model(vocab.size()), cfg.target_dims, cfg.sample_length, options);

    std::ofstream out_file;
    std::ostream& out = open_output(out_file, args.out);
    out << metrics_to_json(report) << '\n';
    if (args.table) out << metrics_to_table(report);
}

struct QueryArgs {
    std::string text;
    std::string keyword;
    std::string embeddings;
    std::size_t k = 10;
};

void run_query(const QueryArgs& args, const RunConfig& cfg) {
    if (args.text.empty() == args.keyword.empty())
        throw ConfigError("query needs exactly one of --text or --keyword");
    require_input(cfg.manifest, "manifest");
    require_input(cfg.vocab, "vocabulary");
    require_input(cfg.checkpoint, "checkpoint");

    const Manifest manifest = load_manifest(cfg.manifest);
    const Vocabulary vocab = Vocabulary::load(cfg.vocab);
    const EncoderParams params = EncoderParams::load(cfg.checkpoint);
    const ModelConfig model = cfg.model(vocab.size());
    const Split split = split_from_name(cfg.eval_split);

    std::map<std::string, std::set<std::string>> labels;
    for (const PairedSample& s : manifest.samples)
        if (s.split == split && !s.keywords.empty()) labels[s.id] = s.keywords;

    std::vector<std::string> ids;
    std::vector<EmbeddingVector> images;
    if (!args.embeddings.empty()) {
        require_input(args.embeddings, "embeddings cache");
        std::tie(ids, images) = load_embeddings(args.embeddings);
    } else {
        const EmbeddedCorpus corpus =
            embed_split(manifest, split, resolve_volumes_root(cfg), vocab, params, model,
                        cfg.target_dims, cfg.sample_length);
        ids = corpus.ids;
        images = corpus.image;
    }

    // Keyword searches default to the expert-labeled pool.
    const bool labeled_only = !args.keyword.empty() && cfg.keyword_pool == "labeled";
    RetrievalIndex index;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (labeled_only && !labels.count(ids[i])) continue;
        index.add(ids[i], images[i]);
    }
    if (index.size() == 0) throw DataError("query pool is empty");
    index.finalize();

    const std::string query_text = args.text.empty() ? args.keyword : args.text;
    const EmbeddingVector query =
        embed_text(query_text, vocab, params, model, cfg.sample_length);
    const RankedResult result = top_k(index, query, args.k);
    char line[256];
    for (std::size_t i = 0; i < result.size(); ++i) {
        std::snprintf(line, sizeof(line), "%zu\t%s\t%.6f", i + 1, result[i].id.c_str(),
                      result[i].score);
        std::cout << line << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"medfinder: dual-stream 3D text-image retrieval at desk scale"};
    app.require_subcommand(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic raw corpus");
    SynthConfig synth_cfg;
    std::string synth_out;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--pairs", synth_cfg.num_pairs, "number of valid pairs");
    synth_cmd->add_option("--signal-words", synth_cfg.signal_words, "finding terms per report");
    synth_cmd->add_option("--words-per-report", synth_cfg.words_per_report, "report length");
    synth_cmd->add_option("--volume-dim", synth_cfg.volume_dim, "cubic volume size");
    synth_cmd->add_option("--pattern-grid", synth_cfg.pattern_grid, "pattern resolution");
    synth_cmd->add_option("--strength", synth_cfg.pattern_strength, "pattern amplitude");
    synth_cmd->add_option("--noise", synth_cfg.noise_sigma, "voxel noise sigma");
    synth_cmd->add_option("--seed", synth_cfg.seed, "generator seed");
    synth_cmd->add_flag("--keywords,!--no-keywords", synth_cfg.keywords, "write keyword labels");
    synth_cmd->add_option("--violate-missing", synth_cfg.violate_missing,
                          "planted samples with > 30% missing voxels");
    synth_cmd->add_option("--violate-dims", synth_cfg.violate_dims,
                          "planted samples with a dimension below 96");
    synth_cmd->add_option("--violate-report", synth_cfg.violate_report,
                          "planted samples with short reports");
    synth_cmd->callback([&] {
        ordered_json j{{"out", synth_out},
                       {"pairs", synth_cfg.num_pairs},
                       {"signal_words", synth_cfg.signal_words},
                       {"words_per_report", synth_cfg.words_per_report},
                       {"volume_dim", synth_cfg.volume_dim},
                       {"pattern_grid", synth_cfg.pattern_grid},
                       {"strength", synth_cfg.pattern_strength},
                       {"noise", synth_cfg.noise_sigma},
                       {"seed", synth_cfg.seed},
                       {"keywords", synth_cfg.keywords},
                       {"violate_missing", synth_cfg.violate_missing},
                       {"violate_dims", synth_cfg.violate_dims},
                       {"violate_report", synth_cfg.violate_report}};
        std::cerr << "config: " << j.dump() << "\n";
        std::cerr << "seed: " << synth_cfg.seed << "\n";
        const SynthCorpus corpus = generate_raw_corpus(synth_out, synth_cfg);
        std::cerr << "wrote " << corpus.samples.size() << " samples to " << synth_out << "\n";
    });

    // curate
    auto* curate_cmd = app.add_subcommand("curate", "filter and anonymize a raw corpus");
    CurateArgs curate_args;
    ConfigCli curate_cli;
    curate_cmd->add_option("--raw", curate_args.raw_dir, "raw corpus directory")->required();
    curate_cmd->add_option("--out", curate_args.out_manifest, "manifest output")->required();
    curate_cmd->add_option("--log", curate_args.log_path, "rejection log (default stdout)");
    curate_cli.attach(curate_cmd);
    curate_cmd->callback([&] {
        const RunConfig cfg = curate_cli.resolve();
        log_config(cfg);
        run_curate(curate_args, cfg);
    });

    // split
    auto* split_cmd = app.add_subcommand("split", "assign train/val/test tags");
    ConfigCli split_cli;
    std::string split_out;
    split_cmd->add_option("--out", split_out, "output manifest (default: in place)");
    split_cli.attach(split_cmd);
    split_cmd->callback([&] {
        const RunConfig cfg = split_cli.resolve();
        log_config(cfg);
        require_input(cfg.manifest, "manifest");
        Manifest manifest = load_manifest(cfg.manifest);
        assign_splits(manifest, cfg.seed);
        save_manifest(split_out.empty() ? cfg.manifest : split_out, manifest);
        std::size_t n_train = 0, n_val = 0, n_test = 0;
        for (const PairedSample& s : manifest.samples) {
            if (s.split == Split::train) ++n_train;
            else if (s.split == Split::val) ++n_val;
            else ++n_test;
        }
        std::cerr << "split sizes: train " << n_train << ", val " << n_val << ", test "
                  << n_test << "\n";
    });

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "summarize a manifest");
    ConfigCli stats_cli;
    bool stats_table = false;
    std::size_t word_freq_top = 0;
    stats_cmd->add_flag("--table", stats_table, "plain-text table instead of JSON");
    stats_cmd->add_option("--word-freq", word_freq_top, "include the top-N word frequencies");
    stats_cli.attach(stats_cmd);
    stats_cmd->callback([&] {
        const RunConfig cfg = stats_cli.resolve();
        log_config(cfg);
        require_input(cfg.manifest, "manifest");
        const Manifest manifest = load_manifest(cfg.manifest);
        const CorpusStats stats = corpus_stats(manifest);
        auto stat_json = [](const SummaryStats& s) {
            return ordered_json{{"average", s.average}, {"median", s.median},
                                {"min", s.min}, {"max", s.max}};
        };
        if (stats_table) {
            char line[160];
            std::cout << "Statistic       Average   Median    Min       Max\n";
            auto row = [&](const char* name, const SummaryStats& s) {
                std::snprintf(line, sizeof(line), "%-15s %-9.1f %-9.0f %-9.0f %-9.0f\n",
                              name, s.average, s.median, s.min, s.max);
                std::cout << line;
            };
            row("image width", stats.width);
            row("image height", stats.height);
            row("slices", stats.slices);
            row("report length", stats.report_length);
        } else {
            ordered_json j;
            j["width"] = stat_json(stats.width);
            j["height"] = stat_json(stats.height);
            j["slices"] = stat_json(stats.slices);
            j["report_length"] = stat_json(stats.report_length);
            if (word_freq_top > 0) {
                std::set<std::string> stopwords;
                if (!cfg.stopwords.empty()) {
                    require_input(cfg.stopwords, "stopwords file");
                    stopwords = load_stopwords(cfg.stopwords);
                }
                auto freq = word_frequency(manifest, stopwords);
                if (freq.size() > word_freq_top) freq.resize(word_freq_top);
                ordered_json words = ordered_json::array();
                for (const auto& [word, count] : freq)
                    words.push_back(ordered_json::array({word, count}));
                j["word_frequency"] = std::move(words);
            }
            std::cout << j.dump(2) << "\n";
        }
    });

    // vocab
    auto* vocab_cmd = app.add_subcommand("vocab", "build a vocabulary from a manifest");
    ConfigCli vocab_cli;
    std::string vocab_out;
    std::string vocab_split = "all";
    std::size_t vocab_max = 4096, vocab_min_count = 1;
    vocab_cmd->add_option("--out", vocab_out, "vocabulary output file")->required();
    vocab_cmd->add_option("--max-size", vocab_max, "max token count");
    vocab_cmd->add_option("--min-count", vocab_min_count, "min occurrences");
    vocab_cmd->add_option("--split", vocab_split, "train | all");
    vocab_cli.attach(vocab_cmd);
    vocab_cmd->callback([&] {
        const RunConfig cfg = vocab_cli.resolve();
        log_config(cfg);
        require_input(cfg.manifest, "manifest");
        Manifest manifest = load_manifest(cfg.manifest);
        if (vocab_split == "train") {
            std::erase_if(manifest.samples,
                          [](const PairedSample& s) { return s.split != Split::train; });
            if (manifest.samples.empty()) throw DataError("train split is empty");
        } else if (vocab_split != "all") {
            throw ConfigError("--split must be 'train' or 'all'");
        }
        std::set<std::string> stopwords;
        if (!cfg.stopwords.empty()) {
            require_input(cfg.stopwords, "stopwords file");
            stopwords = load_stopwords(cfg.stopwords);
        }
        auto freq = word_frequency(manifest, stopwords);
        std::vector<std::string> tokens;
        for (const auto& [word, count] : freq) {
            if (count < vocab_min_count || tokens.size() >= vocab_max) break;
            tokens.push_back(word);
        }
        if (tokens.empty()) throw DataError("vocabulary would be empty");
        Vocabulary(tokens).save(vocab_out);
        std::cerr << "wrote " << tokens.size() << " tokens to " << vocab_out << "\n";
    });

    // train / embed / eval / query
    auto* train_cmd = app.add_subcommand("train", "train the vision encoder");
    ConfigCli train_cli;
    train_cli.attach(train_cmd);
    train_cmd->callback([&] {
        const RunConfig cfg = train_cli.resolve();
        log_config(cfg);
        run_train(cfg);
    });

    auto* embed_cmd = app.add_subcommand("embed", "write embedding caches for a split");
    ConfigCli embed_cli;
    EmbedArgs embed_args;
    embed_cmd->add_option("--out-images", embed_args.out_images, "image embedding output");
    embed_cmd->add_option("--out-texts", embed_args.out_texts, "text embedding output");
    embed_cmd->add_option("--split", embed_args.split, "split to embed");
    embed_cli.attach(embed_cmd);
    embed_cmd->callback([&] {
        const RunConfig cfg = embed_cli.resolve();
        log_config(cfg);
        run_embed(embed_args, cfg);
    });

    auto* eval_cmd = app.add_subcommand("eval", "run the retrieval evaluation");
    ConfigCli eval_cli;
    EvalArgs eval_args;
    eval_cmd->add_option("--out", eval_args.out, "report output (default stdout)");
    eval_cmd->add_flag("--table", eval_args.table, "append a plain-text table");
    eval_cli.attach(eval_cmd);
    eval_cmd->callback([&] {
        const RunConfig cfg = eval_cli.resolve();
        log_config(cfg);
        run_eval(eval_args, cfg);
    });

    auto* query_cmd = app.add_subcommand("query", "rank volumes for a text or keyword");
    ConfigCli query_cli;
    QueryArgs query_args;
    query_cmd->add_option("--text", query_args.text, "free-text query");
    query_cmd->add_option("--keyword", query_args.keyword, "keyword query");
    query_cmd->add_option("--embeddings", query_args.embeddings, "image embedding cache");
    query_cmd->add_option("--k", query_args.k, "results to return");
    query_cli.attach(query_cmd);
    query_cmd->callback([&] {
        const RunConfig cfg = query_cli.resolve();
        log_config(cfg);
        run_query(query_args, cfg);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
