// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0
//
// flashvid command-line tool: train, generate, interpolate, bench, selftest.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "flashvid/bench.hpp"
#include "flashvid/checkpoint.hpp"
#include "flashvid/config.hpp"
#include "flashvid/generation.hpp"
#include "flashvid/tokenizer.hpp"

namespace fs = std::filesystem;
using namespace flashvid;

namespace {

using Weights = ModelWeights<float>;

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string checkpoint;
};

void add_common(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_option("-c,--config", o.config_path, "key = value config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", o.overrides, "override a config key (key=value), repeatable");
}

RunConfig resolve_config(const CommonOptions& o)
{
    RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
    apply_overrides(cfg, o.overrides);
    return cfg;
}

/// Loads the checkpoint when given, otherwise initializes a model from the
/// config (useful for smoke runs; the output is untrained).
Model<float> resolve_model(const CommonOptions& o, const RunConfig& cfg, const VocabLayout& layout)
{
    if (!o.checkpoint.empty()) {
        auto [w, dec] = load_checkpoint<float>(o.checkpoint);
        if (dec.vocab_size != layout.vocab_size()) {
            throw ConfigError("checkpoint vocabulary " + std::to_string(dec.vocab_size) +
                              " does not match the sequencer layout of " +
                              std::to_string(layout.vocab_size()));
        }
        return {dec, std::move(w)};
    }
    const auto dec = cfg.decoder(layout);
    std::cerr << "note: no --checkpoint given, using an untrained model (init_seed "
              << cfg.init_seed << ")\n";
    return {dec, Weights::init(dec, cfg.init_seed, cfg.init_stddev)};
}

std::size_t resolve_label(const std::string& label, const SyntheticDatasetSpec& spec)
{
    for (std::size_t i = 0; i < spec.classes.size(); ++i) {
        if (spec.classes[i].name == label) {
            return i;
        }
    }
    std::size_t idx = 0;
    if (detail::parse_number(label, idx) && idx < spec.classes.size()) {
        return idx;
    }
    std::string names;
    for (const auto& c : spec.classes) {
        names += (names.empty() ? "" : ", ") + c.name;
    }
    throw InputError("unknown label '" + label + "' (expected one of " + names + ")");
}

std::string read_text(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    if (!f) {
        throw IoError("cannot open " + p.string());
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f || !f.write(text.data(), static_cast<std::streamsize>(text.size()))) {
        throw IoError("cannot write " + p.string());
    }
}

void write_frames(const fs::path& dir, std::span<const FrameGrid> frames, const Codebook& cb)
{
    fs::create_directories(dir);
    write_text(dir / "frames.txt", format_grids(frames));
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03zu.ppm", i + 1);
        write_p6(decode_frame(frames[i], cb), dir / name);
    }
}

int cmd_train(const CommonOptions& o, const std::string& out, const std::string& loss_csv,
              const std::string& dataset_dump)
{
    const RunConfig cfg = resolve_config(o);
    const VocabLayout layout;
    const Sequencer seq(layout, cfg.start_of_image);
    const auto spec = cfg.dataset();
    const auto clips = generate_dataset(spec, layout);
    if (!dataset_dump.empty()) {
        std::string text;
        for (const auto& c : clips) {
            text += "# " + spec.classes[c.label].name + "\n" + format_grids(c.frames) + "\n";
        }
        write_text(dataset_dump, text);
    }
    const auto data = training_sequences(clips, seq, cfg.interpolation_tasks);
    const auto dec = cfg.decoder(layout);
    auto w = Weights::init(dec, cfg.init_seed, cfg.init_stddev);
    std::cerr << "training " << w.parameter_count() << " parameters on " << data.size()
              << " sequences\n";
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = train(w, dec, data, cfg.training(), [&](std::size_t e, double loss) {
        const double s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "epoch %zu loss %.5f (%.1fs)\n", e, loss, s);
        return true;
    });
    save_checkpoint(w, dec, out);
    if (!loss_csv.empty()) {
        std::string csv = "epoch,loss\n";
        for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
            char line[64];
            std::snprintf(line, sizeof line, "%zu,%.9g\n", e, result.loss_history[e]);
            csv += line;
        }
        write_text(loss_csv, csv);
    }
    std::cerr << "wrote " << out << "\n";
    return 0;
}

int cmd_generate(const CommonOptions& o, const std::string& label, std::size_t frames,
                 const std::string& given_path, const std::string& out_dir)
{
    const RunConfig cfg = resolve_config(o);
    const VocabLayout layout;
    const Sequencer seq(layout, cfg.start_of_image);
    const auto spec = cfg.dataset();
    const auto model = resolve_model(o, cfg, layout);
    const std::vector<Token> text{layout.text(resolve_label(label, spec))};
    std::vector<FrameGrid> given;
    if (!given_path.empty()) {
        given = parse_grids(read_text(given_path));
    }
    auto sampler = cfg.sampler();
    const auto out = generate_keyframes(model, seq, text, frames, cfg.rows, cfg.cols, sampler, given);
    write_frames(out_dir, out, Codebook::rgb_lattice());
    std::cerr << "wrote " << out.size() << " frames to " << out_dir << "\n";
    return 0;
}

int cmd_interpolate(const CommonOptions& o, const std::string& label, const std::string& keys,
                    const std::string& out_dir)
{
    const RunConfig cfg = resolve_config(o);
    const VocabLayout layout;
    const Sequencer seq(layout, cfg.start_of_image);
    const auto model = resolve_model(o, cfg, layout);
    const std::vector<Token> text{layout.text(resolve_label(label, cfg.dataset()))};
    const auto keyframes = parse_grids(read_text(keys));
    const auto out = recursive_interpolate(keyframes, cfg.rounds, cfg.per_gap, model, cfg.policy(),
                                           seq, text, cfg.sampler());
    write_frames(out_dir, out, Codebook::rgb_lattice());
    std::cerr << "wrote " << out.size() << " frames to " << out_dir << "\n";
    return 0;
}

template <class V>
std::vector<V> split_list(const std::string& s, V (*convert)(const std::string&))
{
    std::vector<V> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(convert(item));
        }
    }
    return out;
}

int cmd_bench(const CommonOptions& o, const std::string& modes, const std::string& lengths,
              const std::string& csv_path)
{
    const RunConfig cfg = resolve_config(o);
    const VocabLayout layout;
    auto model = resolve_model(o, cfg, layout);
    BenchScenario sc;
    sc.modes = split_list<BenchMode>(modes, parse_bench_mode);
    sc.lengths = split_list<std::size_t>(lengths, [](const std::string& s) {
        std::size_t v = 0;
        if (!detail::parse_number(s, v)) {
            throw ScenarioError("bad length '" + s + "'");
        }
        return v;
    });
    sc.repetitions = cfg.repetitions;
    sc.warmup = cfg.warmup;
    sc.frame_tokens = cfg.rows * cfg.cols;
    const auto records = run_bench(sc, model);
    const auto csv = bench_csv(records);
    if (csv_path.empty()) {
        std::cout << csv;
    } else {
        write_text(csv_path, csv);
    }
    std::cerr << bench_report(records);
    return 0;
}

// ---------------------------------------------------------------------------
// selftest: fast, self-contained checks of the core equivalences against
// direct evaluations.

std::string sci(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct Check {
    std::string name;
    bool ok;
    std::string detail;
};

Check check_retention_modes()
{
    SplitMix64 rng(11);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t heads = 1 + rng.below(3);
        const std::size_t d = heads * 2 * (1 + rng.below(4));
        const auto cfg = RetentionConfig::make(d, heads);
        const auto w = RetentionWeights<double>::random(cfg, rng, 0.5);
        const std::size_t len = 1 + rng.below(24);
        Tensor<double> x({len, d});
        for (auto& v : x.storage()) {
            v = rng.normal();
        }
        const auto par = retention_parallel<double>(x, w, cfg);
        auto state = RetentionState<double>::fresh(cfg);
        for (std::size_t n = 0; n < len; ++n) {
            const auto y = retention_recurrent_step<double>(x.row(n), state, w, cfg);
            for (std::size_t i = 0; i < d; ++i) {
                worst = std::max(worst, std::abs(y[i] - par(n, i)));
            }
        }
    }
    return {"retention parallel == recurrent", worst <= 1e-9, "max diff " + sci(worst)};
}

Check check_decoder_modes()
{
    SplitMix64 rng(12);
    DecoderConfig cfg;
    cfg.layers = 2;
    cfg.vocab_size = 19;
    cfg.d_model = 16;
    cfg.ffn_hidden = 24;
    cfg.retention = RetentionConfig::make(16, 2);
    const auto w = ModelWeights<double>::init(cfg, 3, 0.3);
    std::vector<Token> toks(30);
    for (auto& t : toks) {
        t = static_cast<Token>(rng.below(cfg.vocab_size));
    }
    const auto par = decoder_forward_parallel<double>(toks, w, cfg);
    auto states = LayerStates<double>::fresh(cfg);
    double worst = 0.0;
    for (std::size_t n = 0; n < toks.size(); ++n) {
        const auto y = decoder_step_recurrent<double>(toks[n], states, w, cfg, true);
        for (std::size_t i = 0; i < cfg.vocab_size; ++i) {
            worst = std::max(worst, std::abs((*y)[i] - par(n, i)));
        }
    }
    return {"decoder parallel == recurrent", worst <= 1e-8, "max diff " + sci(worst)};
}

Check check_gradients()
{
    SplitMix64 rng(13);
    Tensor<double> a({3, 4}), b({4, 5}), g({5});
    for (auto* t : {&a, &b, &g}) {
        for (auto& v : t->storage()) {
            v = rng.normal();
        }
    }
    auto loss = [&](Tape<double>& t, Var va, Var vb, Var vg) {
        Var h = ops::rms_norm(t, ops::matmul(t, va, vb), vg);
        return ops::sum(t, ops::mul(t, ops::sigmoid(t, h), h));
    };
    a.ensure_grad();
    a.zero_grad();
    {
        Tape<double> t;
        t.backward(loss(t, t.leaf(a), t.constant_ref(b), t.constant_ref(g)));
    }
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto eval = [&](double delta) {
            const double saved = a[i];
            a[i] = saved + delta;
            Tape<double> t(Tape<double>::Mode::inference);
            const double v =
                t.value(loss(t, t.constant_ref(a), t.constant_ref(b), t.constant_ref(g)))[0];
            a[i] = saved;
            return v;
        };
        const double numeric = (eval(1e-5) - eval(-1e-5)) / 2e-5;
        diff += std::pow(a.grad()[i] - numeric, 2);
        ref += numeric * numeric;
    }
    const double rel = std::sqrt(diff / ref);
    return {"autodiff matches finite differences", rel <= 1e-6, "relative error " + sci(rel)};
}

Check check_classification()
{
    SplitMix64 rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t rows = 1 + rng.below(12), cols = 1 + rng.below(12);
        FrameGrid a(rows, cols), b(rows, cols);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a.tokens[i] = static_cast<Token>(rng.below(4));
            b.tokens[i] = rng.uniform() < 0.1 ? static_cast<Token>(rng.below(4)) : a.tokens[i];
        }
        const auto m = classify_tokens(a, b, {0.2, 1, rng()});
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                bool near = false;
                for (std::size_t y = 0; y < rows; ++y) {
                    for (std::size_t x = 0; x < cols; ++x) {
                        const auto dy = static_cast<long>(y) - static_cast<long>(r);
                        const auto dx = static_cast<long>(x) - static_cast<long>(c);
                        near = near || (std::abs(dy) <= 1 && std::abs(dx) <= 1 &&
                                        a.at(y, x) != b.at(y, x));
                    }
                }
                const TokenClass got = m.at(r, c);
                const TokenClass want = a.at(r, c) != b.at(r, c) ? TokenClass::different
                                        : near                   ? TokenClass::unstable
                                                                 : TokenClass::stable;
                const TokenClass got_base =
                    got == TokenClass::inheritable ? TokenClass::stable : got;
                if (got_base != want) {
                    return {"token classification matches brute force", false,
                            "mismatch in trial " + std::to_string(trial)};
                }
            }
        }
    }
    return {"token classification matches brute force", true, "50 random grids"};
}

Check check_sequencer_and_tokenizer()
{
    const VocabLayout layout;
    const Sequencer seq(layout);
    const std::vector<Token> text{layout.text(0)};
    auto plan = seq.build_interpolation_prompt(text, FrameGrid(2, 2, 1), FrameGrid(2, 2, 2), 3);
    for (std::size_t j = 1; j <= 3; ++j) {
        seq.append_frame(plan, text, j + 1, FrameGrid(2, 2, static_cast<Token>(10 + j)));
    }
    const auto frames = seq.reorganize_frames(plan, 2, 2);
    bool ok = frames.size() == 5 && frames[0].tokens[0] == 1 && frames[1].tokens[0] == 11 &&
              frames[3].tokens[0] == 13 && frames[4].tokens[0] == 2 && plan.tiles();
    const auto cb = Codebook::rgb_lattice();
    FrameGrid g(3, 2);
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.tokens[i] = static_cast<Token>(i * 11 % 64);
    }
    ok = ok && encode_frame(decode_frame(g, cb), cb) == g;
    return {"sequencer golden and tokenizer round trip", ok, ""};
}

int cmd_selftest()
{
    const std::vector<Check> checks{check_retention_modes(), check_decoder_modes(),
                                    check_gradients(), check_classification(),
                                    check_sequencer_and_tokenizer()};
    int failed = 0;
    for (const auto& c : checks) {
        std::printf("[%s] %s%s%s\n", c.ok ? "PASS" : "FAIL", c.name.c_str(),
                    c.detail.empty() ? "" : ": ", c.detail.c_str());
        failed += c.ok ? 0 : 1;
    }
    std::printf("%d of %zu checks failed\n", failed, checks.size());
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"flashvid: retention-based video token generation"};
    app.require_subcommand(1);

    CommonOptions train_opts, gen_opts, interp_opts, bench_opts;

    auto* train_cmd = app.add_subcommand("train", "train on the synthetic sprite dataset");
    add_common(train_cmd, train_opts);
    std::string train_out = "model.fvid", loss_csv, dataset_dump;
    train_cmd->add_option("-o,--out", train_out, "checkpoint to write")->capture_default_str();
    train_cmd->add_option("--loss-csv", loss_csv, "write per-epoch loss as CSV");
    train_cmd->add_option("--dump-dataset", dataset_dump, "write the dataset as grid text");

    auto* gen_cmd = app.add_subcommand("generate", "generate key frames for a label");
    add_common(gen_cmd, gen_opts);
    std::string gen_label = "right", gen_given, gen_out = "generated";
    std::size_t gen_frames = 4;
    std::uint64_t gen_seed = 0;
    double gen_temperature = -1.0;
    gen_cmd->add_option("--checkpoint", gen_opts.checkpoint, "model checkpoint")
        ->check(CLI::ExistingFile);
    gen_cmd->add_option("--label", gen_label, "motion class name or index")->capture_default_str();
    gen_cmd->add_option("--frames", gen_frames, "number of key frames")->capture_default_str();
    gen_cmd->add_option("--seed", gen_seed, "sampling seed");
    gen_cmd->add_option("--temperature", gen_temperature, "sampling temperature (0 = greedy)");
    gen_cmd->add_option("--given", gen_given, "grid text file with leading frames to condition on")
        ->check(CLI::ExistingFile);
    gen_cmd->add_option("-o,--out-dir", gen_out, "output directory")->capture_default_str();

    auto* interp_cmd = app.add_subcommand("interpolate", "fill frames between key frames");
    add_common(interp_cmd, interp_opts);
    std::string interp_label = "right", interp_keys, interp_out = "interpolated";
    std::size_t interp_k = 0, interp_rounds = 0;
    double interp_rho = -1.0;
    std::uint64_t interp_seed = 0;
    interp_cmd->add_option("--checkpoint", interp_opts.checkpoint, "model checkpoint")
        ->check(CLI::ExistingFile);
    interp_cmd->add_option("--keyframes", interp_keys, "grid text file with >= 2 key frames")
        ->required()
        ->check(CLI::ExistingFile);
    interp_cmd->add_option("--label", interp_label, "motion class name or index")
        ->capture_default_str();
    interp_cmd->add_option("-k,--per-gap", interp_k, "frames inserted per gap");
    interp_cmd->add_option("--rounds", interp_rounds, "recursive rounds");
    interp_cmd->add_option("--rho", interp_rho, "inheritable fraction of stable tokens");
    interp_cmd->add_option("--seed", interp_seed, "sampling and selection seed");
    interp_cmd->add_option("-o,--out-dir", interp_out, "output directory")->capture_default_str();

    auto* bench_cmd = app.add_subcommand("bench", "time recurrent decoding against the baseline");
    add_common(bench_cmd, bench_opts);
    std::string bench_modes = "recurrent,ar_baseline", bench_lengths = "64,128,256", bench_csv_path;
    bench_cmd->add_option("--checkpoint", bench_opts.checkpoint, "model checkpoint")
        ->check(CLI::ExistingFile);
    bench_cmd->add_option("--modes", bench_modes, "comma-separated modes")->capture_default_str();
    bench_cmd->add_option("--lengths", bench_lengths, "comma-separated ascending lengths")
        ->capture_default_str();
    bench_cmd->add_option("--csv", bench_csv_path, "write CSV here instead of stdout");

    auto* self_cmd = app.add_subcommand("selftest", "run the built-in equivalence checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*train_cmd) {
            return cmd_train(train_opts, train_out, loss_csv, dataset_dump);
        }
        if (*gen_cmd) {
            if (gen_cmd->count("--seed")) {
                gen_opts.overrides.push_back("seed=" + std::to_string(gen_seed));
            }
            if (gen_temperature >= 0.0) {
                gen_opts.overrides.push_back("temperature=" + std::to_string(gen_temperature));
            }
            return cmd_generate(gen_opts, gen_label, gen_frames, gen_given, gen_out);
        }
        if (*interp_cmd) {
            if (interp_k) {
                interp_opts.overrides.push_back("per_gap=" + std::to_string(interp_k));
            }
            if (interp_rounds) {
                interp_opts.overrides.push_back("rounds=" + std::to_string(interp_rounds));
            }
            if (interp_rho >= 0.0) {
                interp_opts.overrides.push_back("inherit_fraction=" + std::to_string(interp_rho));
            }
            if (interp_cmd->count("--seed")) {
                interp_opts.overrides.push_back("seed=" + std::to_string(interp_seed));
            }
            return cmd_interpolate(interp_opts, interp_label, interp_keys, interp_out);
        }
        if (*bench_cmd) {
            return cmd_bench(bench_opts, bench_modes, bench_lengths, bench_csv_path);
        }
        if (*self_cmd) {
            return cmd_selftest();
        }
    } catch (const ConfigFileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
