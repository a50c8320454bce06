// Command-line front end: train, crop, extend, reconstruct, eval, info.
//
// Every command is deterministic given its flags and seed. Exit codes:
// 0 success, 2 usage error, 3 data/format error, 4 training divergence.
// LGINR_THREADS (default 1) sets the worker-thread count; results are bitwise
// identical for any value.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "lginr/edit.hpp"
#include "lginr/metrics.hpp"
#include "lginr/model.hpp"
#include "lginr/partition.hpp"
#include "lginr/reconstruct.hpp"
#include "lginr/signalio.hpp"
#include "lginr/store.hpp"
#include "lginr/train.hpp"

using json = nlohmann::json;
using namespace lginr;
using idx = lginr::index;

namespace {

json json_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

std::vector<std::uint32_t> parse_u32_list(const std::string& s, const char* what) {
    std::vector<std::uint32_t> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto pos = s.find(',', start);
        const auto tok = s.substr(start, pos - start);
        try {
            std::size_t used = 0;
            const auto v = std::stoul(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(static_cast<std::uint32_t>(v));
        } catch (const std::exception&) {
            throw std::runtime_error(std::string(what) + ": '" + tok + "' is not an integer");
        }
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    if (out.empty()) throw std::runtime_error(std::string(what) + ": empty list");
    return out;
}

std::vector<idx> parse_idx_list(const std::string& s, const char* what) {
    std::vector<idx> out;
    for (auto v : parse_u32_list(s, what)) out.push_back(static_cast<idx>(v));
    return out;
}

struct LoadedSignal {
    Signal signal;
    int sample_rate = 16000;
    bool is_audio = false;
};

LoadedSignal load_signal_any(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error("cannot open signal file " + path);
    char head[4] = {};
    probe.read(head, 4);
    probe.close();
    LoadedSignal out;
    if (head[0] == 'P' && (head[1] == '5' || head[1] == '6')) {
        out.signal = load_image(path);
    } else if (std::string_view(head, 4) == "RIFF") {
        out.signal = load_wav(path, &out.sample_rate);
        out.is_audio = true;
    } else {
        throw std::runtime_error("unrecognized signal format in " + path +
                                 " (expected binary PGM/PPM or 16-bit mono WAV)");
    }
    return out;
}

// quantize a reconstruction through the byte/sample grid of its container so
// eval compares what a decoder would actually see
Signal quantize_like(const Signal& s, bool audio) {
    Signal q = s;
    for (auto& v : q.values) {
        if (audio) {
            double x = static_cast<double>(v) * 32768.0;
            long t = std::lround(x);
            if (t > 32767) t = 32767;
            if (t < -32768) t = -32768;
            v = static_cast<float>(t) / 32768.0f;
        } else {
            double u = (static_cast<double>(v) + 1.0) / 2.0;
            u = std::clamp(u, 0.0, 1.0);
            v = static_cast<float>(2.0 * (std::lround(u * 255.0) / 255.0) - 1.0);
        }
    }
    return q;
}

json eval_metrics(const Signal& recon, const Signal& ref) {
    json out;
    out["mse"] = json_metric(mse(recon, ref));
    out["psnr"] = json_metric(psnr(recon, ref));
    if (ref.dims() == 2 && ref.resolution[0] >= 11 && ref.resolution[1] >= 11)
        out["ssim"] = json_metric(ssim(recon, ref));
    else
        out["ssim"] = nullptr;
    return out;
}

void write_history(const std::string& path, const std::vector<HistoryEntry>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write history file " + path);
    out << "iteration,mse,psnr\n";
    for (const auto& h : history) {
        out << h.iter << "," << h.mse << ",";
        if (std::isinf(h.psnr))
            out << "inf";
        else
            out << h.psnr;
        out << "\n";
    }
}

json breakdown_json(const Model<float>& model) {
    const auto b = param_breakdown(model.spec, model.present.kept_count());
    return {{"total", b.total},
            {"local", b.local_total},
            {"global_net", b.global_net},
            {"merge", b.merge},
            {"global_and_merge", b.global_net + b.merge},
            {"per_partition", b.local_per_partition}};
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------
struct TrainArgs {
    std::string signal_path, arch = "lgs", out_path, history_path;
    std::string factors, partition_size = "32,32", merge = "concat_fc";
    idx hidden = 0, local_hidden = 0, global_hidden = 0, depth = 5;
    idx iters = 1000, log_every = 100, target_params = 0;
    double lr = 5e-4, global_lr = -1.0, weight_decay = 0.0, sample_fraction = 1.0;
    double global_ratio = 0.11, omega = 30.0;
    std::uint64_t seed = 1;
    bool auto_plan = false;
};

int cmd_train(const TrainArgs& a) {
    auto loaded = load_signal_any(a.signal_path);
    const Signal& signal = loaded.signal;
    const idx n = signal.dims();

    ModelSpec spec;
    spec.kind = model_kind_from_string(a.arch);
    spec.in_dim = n;
    spec.out_dim = signal.channels;
    spec.depth = a.depth;
    spec.omega = static_cast<float>(a.omega);
    spec.merge = merge_kind_from_string(a.merge);

    std::vector<std::uint32_t> factors;
    if (a.auto_plan) {
        if (spec.kind != ModelKind::lgs)
            throw std::runtime_error("--auto plans lgs architectures only");
        if (a.target_params < 1) throw std::runtime_error("--auto requires --target-params");
        auto psize = parse_idx_list(a.partition_size, "--partition-size");
        if (static_cast<idx>(psize.size()) != n)
            throw std::runtime_error("--partition-size dimensionality differs from the signal");
        auto plan = auto_partition(a.target_params, a.global_ratio, psize, signal.resolution,
                                   spec.depth, spec.out_dim, spec.merge == MergeKind::fc_add);
        factors = plan.factors;
        spec.local_hidden = plan.local_hidden;
        spec.global_hidden = plan.global_hidden;
    } else {
        if (spec.kind == ModelKind::siren) {
            if (a.hidden < 1) throw std::runtime_error("siren needs --hidden");
            spec.local_hidden = a.hidden;
            factors.assign(static_cast<std::size_t>(n), 1);
        } else {
            if (a.factors.empty()) throw std::runtime_error("this architecture needs --factors");
            factors = parse_u32_list(a.factors, "--factors");
            if (static_cast<idx>(factors.size()) != n)
                throw std::runtime_error("--factors dimensionality differs from the signal");
            if (a.local_hidden < 1) throw std::runtime_error("needs --local-hidden");
            spec.local_hidden = a.local_hidden;
            if (spec.kind == ModelKind::lgs) {
                if (a.global_hidden < 1) throw std::runtime_error("lgs needs --global-hidden");
                spec.global_hidden = a.global_hidden;
            }
        }
    }
    spec.grid = make_unit_grid(factors);
    spec.validate();

    Rng rng(a.seed);
    auto model = init<float>(spec, rng);

    TrainConfig cfg;
    cfg.iters = a.iters;
    cfg.lr = a.lr;
    cfg.global_lr = a.global_lr;
    cfg.weight_decay = a.weight_decay;
    cfg.sample_fraction = a.sample_fraction;
    cfg.seed = rng.next_u64();
    cfg.log_every = a.log_every;

    auto res = fit(model, signal, cfg);
    save(model, a.out_path);
    const std::string history_path =
        a.history_path.empty() ? a.out_path + ".history.csv" : a.history_path;
    write_history(history_path, res.history);

    auto recon = reconstruct(model, signal.resolution);
    json summary = {{"command", "train"},
                    {"arch", to_string(spec.kind)},
                    {"merge", spec.kind == ModelKind::lgs ? to_string(spec.merge) : ""},
                    {"factors", factors},
                    {"local_hidden", spec.local_hidden},
                    {"global_hidden", spec.global_hidden},
                    {"depth", spec.depth},
                    {"omega", spec.omega},
                    {"iters", a.iters},
                    {"seed", a.seed},
                    {"params", breakdown_json(model)},
                    {"metrics", eval_metrics(recon, signal)},
                    {"train_seconds", res.seconds},
                    {"model", a.out_path},
                    {"history", history_path}};
    std::cout << summary.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// crop
// ---------------------------------------------------------------------------
int cmd_crop(const std::string& model_path, const std::string& drop_spec,
             const std::string& out_path) {
    auto model = load(model_path);
    const auto before = param_count(model);
    auto drop = parse_drop_spec(drop_spec, model.spec.grid);
    crop_file(model_path, drop, out_path);
    auto cropped = load(out_path);
    json summary = {{"command", "crop"},
                    {"dropped", drop.size()},
                    {"params_before", before},
                    {"params_after", param_count(cropped)},
                    {"partitions_present", cropped.present.kept_count()},
                    {"partitions_total", cropped.spec.partition_count()},
                    {"model", out_path}};
    std::cout << summary.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// extend
// ---------------------------------------------------------------------------
struct ExtendArgs {
    std::string model_path, new_factors, signal_path, out_path, history_path, init_rule = "mirror";
    idx iters = 0, log_every = 100;
    double lr = 5e-4, sample_fraction = 1.0, weight_decay = 0.0;
    std::uint64_t seed = 1;
    bool freeze_old = false;
};

int cmd_extend(const ExtendArgs& a) {
    auto model = load(a.model_path);
    auto nf = parse_u32_list(a.new_factors, "--new-factors");
    if (static_cast<idx>(nf.size()) != model.spec.grid.dims())
        throw std::runtime_error("--new-factors dimensionality differs from the model");

    Rng rng(a.seed);
    bool unchanged = true;
    for (std::size_t d = 0; d < nf.size(); ++d)
        if (nf[d] != model.spec.grid.factors[d]) unchanged = false;

    FreezeMask freeze;
    if (unchanged) {
        std::cerr << "warning: new factors equal the current grid; model is unchanged\n";
    } else {
        Bounds grown = model.spec.grid.bounds;
        for (idx d = 0; d < model.spec.grid.dims(); ++d)
            grown.hi[static_cast<std::size_t>(d)] =
                grown.lo[static_cast<std::size_t>(d)] +
                static_cast<double>(nf[static_cast<std::size_t>(d)]) * model.spec.grid.delta(d);
        ExtendInit rule = ExtendInit::mirror;
        if (a.init_rule == "clamp")
            rule = ExtendInit::clamp;
        else if (a.init_rule == "random")
            rule = ExtendInit::random;
        else if (a.init_rule != "mirror")
            throw std::runtime_error("--init must be mirror, clamp or random");
        auto ext = extend(model, nf, grown, rng, rule);
        model = std::move(ext.model);
        freeze = std::move(ext.freeze_old);
        // fine-tuning happens against freshly normalized signal coordinates
        renormalize_bounds(model, Bounds::unit(model.spec.grid.dims()));
    }

    FitResult res;
    if (a.iters > 0) {
        auto loaded = load_signal_any(a.signal_path);
        TrainConfig cfg;
        cfg.iters = a.iters;
        cfg.lr = a.lr;
        cfg.weight_decay = a.weight_decay;
        cfg.sample_fraction = a.sample_fraction;
        cfg.seed = rng.next_u64();
        cfg.log_every = a.log_every;
        res = fit(model, loaded.signal, cfg, a.freeze_old ? &freeze : nullptr);
    }
    save(model, a.out_path);
    if (!a.history_path.empty()) write_history(a.history_path, res.history);

    json summary = {{"command", "extend"},
                    {"factors", model.spec.grid.factors},
                    {"params", breakdown_json(model)},
                    {"fine_tune_iters", a.iters},
                    {"frozen_old", a.freeze_old},
                    {"train_seconds", res.seconds},
                    {"model", a.out_path}};
    std::cout << summary.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// reconstruct / eval / info
// ---------------------------------------------------------------------------
int cmd_reconstruct(const std::string& model_path, const std::string& out_path,
                    const std::string& resolution, const std::string& like, double fill,
                    int sample_rate) {
    auto model = load(model_path);
    std::vector<idx> res;
    if (!like.empty()) {
        auto ref = load_signal_any(like);
        res = ref.signal.resolution;
        if (ref.is_audio) sample_rate = ref.sample_rate;
    } else if (!resolution.empty()) {
        res = parse_idx_list(resolution, "--resolution");
    } else {
        throw std::runtime_error("reconstruct needs --resolution or --like");
    }

    ReconstructStats stats;
    auto signal = reconstruct(model, res, static_cast<float>(fill), &stats);
    if (signal.dims() == 2)
        save_image(signal, out_path);
    else if (signal.dims() == 1)
        save_wav(signal, out_path, sample_rate);
    else
        throw std::runtime_error("only 1- and 2-dimensional reconstructions can be written");

    json summary = {{"command", "reconstruct"},
                    {"resolution", res},
                    {"filled_points", stats.filled_points},
                    {"cropped_regions", stats.filled_points > 0},
                    {"fill_value", fill},
                    {"output", out_path}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& ref_path) {
    auto model = load(model_path);
    auto ref = load_signal_any(ref_path);
    auto recon = quantize_like(reconstruct(model, ref.signal.resolution), ref.is_audio);
    json summary = {{"command", "eval"},
                    {"reference", ref_path},
                    {"params", param_count(model)},
                    {"metrics", eval_metrics(recon, ref.signal)}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_info(const std::string& model_path) {
    auto model = load(model_path);
    const auto& spec = model.spec;
    const auto b = param_breakdown(spec, model.present.kept_count());
    const idx K = spec.partition_count();
    const idx kept = model.present.kept_count();

    std::cerr << "kind: " << to_string(spec.kind) << "  depth: " << spec.depth
              << "  omega: " << spec.omega << "\n"
              << "in/out dims: " << spec.in_dim << "/" << spec.out_dim
              << "  local hidden: " << spec.local_hidden;
    if (spec.kind == ModelKind::lgs)
        std::cerr << "  global hidden: " << spec.global_hidden
                  << "  merge: " << to_string(spec.merge);
    std::cerr << "\n"
              << "global+merge: " << b.global_net + b.merge << ", per-partition: "
              << b.local_per_partition << ", partitions: " << kept << "/" << K << "\n"
              << "params vs cropped partitions (from the current " << kept << "):\n";
    for (idx step = 0; step <= 4; ++step) {
        const idx dropped = std::min(kept - 1, step * (kept / 4 > 0 ? kept / 4 : 1));
        std::cerr << "  drop " << dropped << " -> "
                  << b.global_net + b.merge + (kept - dropped) * b.local_per_partition << "\n";
        if (dropped == kept - 1) break;
    }

    json summary = {{"command", "info"},
                    {"kind", to_string(spec.kind)},
                    {"merge", spec.kind == ModelKind::lgs ? to_string(spec.merge) : ""},
                    {"in_dim", spec.in_dim},
                    {"out_dim", spec.out_dim},
                    {"depth", spec.depth},
                    {"local_hidden", spec.local_hidden},
                    {"global_hidden", spec.global_hidden},
                    {"omega", spec.omega},
                    {"factors", spec.grid.factors},
                    {"partitions_present", kept},
                    {"partitions_total", K},
                    {"params", breakdown_json(model)}};
    std::cout << summary.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* t = std::getenv("LGINR_THREADS")) {
        try {
            set_thread_count(std::stoi(t));
        } catch (const std::exception&) {
            std::cerr << "error: LGINR_THREADS must be a positive integer\n";
            return 2;
        }
    }

    CLI::App app{"Local-global sinusoidal signal encoder with croppable weights"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Fit a model to a signal");
    train_cmd->add_option("--signal", ta.signal_path, "Input PGM/PPM/WAV")->required();
    train_cmd->add_option("--arch", ta.arch, "siren, spp or lgs")->required();
    train_cmd->add_option("--out", ta.out_path, "Output model path")->required();
    train_cmd->add_option("--factors", ta.factors, "Partition factors, e.g. 16,16");
    train_cmd->add_option("--hidden", ta.hidden, "Hidden width (siren)");
    train_cmd->add_option("--local-hidden", ta.local_hidden, "Local hidden width");
    train_cmd->add_option("--global-hidden", ta.global_hidden, "Global hidden width (lgs)");
    train_cmd->add_option("--depth", ta.depth, "Layer count including the output layer");
    train_cmd->add_option("--omega", ta.omega, "Sine frequency");
    train_cmd->add_option("--merge", ta.merge, "concat_fc or fc_add");
    train_cmd->add_flag("--auto", ta.auto_plan, "Plan factors and widths automatically");
    train_cmd->add_option("--target-params", ta.target_params, "Auto: total parameter budget");
    train_cmd->add_option("--global-ratio", ta.global_ratio, "Auto: global weight share");
    train_cmd->add_option("--partition-size", ta.partition_size,
                          "Auto: target partition size per dimension");
    train_cmd->add_option("--iters", ta.iters, "Training iterations")->required();
    train_cmd->add_option("--lr", ta.lr, "Learning rate");
    train_cmd->add_option("--global-lr", ta.global_lr, "Separate global/merge learning rate");
    train_cmd->add_option("--weight-decay", ta.weight_decay, "Decoupled weight decay");
    train_cmd->add_option("--sample-fraction", ta.sample_fraction,
                          "Per-partition fraction of points per iteration");
    train_cmd->add_option("--seed", ta.seed, "Seed for init and sampling");
    train_cmd->add_option("--log-every", ta.log_every, "History stride");
    train_cmd->add_option("--history", ta.history_path, "History CSV path");

    std::string crop_model, crop_drop, crop_out;
    auto* crop_cmd = app.add_subcommand("crop", "Remove partitions from a model file");
    crop_cmd->add_option("--model", crop_model, "Input model")->required();
    crop_cmd->add_option("--drop", crop_drop,
                         "Flat indices '0,5' or rectangles 'i0..i1,j0..j1;...'")->required();
    crop_cmd->add_option("--out", crop_out, "Output model")->required();

    ExtendArgs ea;
    auto* extend_cmd = app.add_subcommand("extend", "Grow the partition grid, then fine-tune");
    extend_cmd->add_option("--model", ea.model_path, "Input model")->required();
    extend_cmd->add_option("--new-factors", ea.new_factors, "Factors of the grown grid")
        ->required();
    extend_cmd->add_option("--signal", ea.signal_path, "Signal covering the grown grid");
    extend_cmd->add_option("--out", ea.out_path, "Output model")->required();
    extend_cmd->add_option("--iters", ea.iters, "Fine-tune iterations");
    extend_cmd->add_option("--lr", ea.lr, "Learning rate");
    extend_cmd->add_option("--weight-decay", ea.weight_decay, "Decoupled weight decay");
    extend_cmd->add_option("--sample-fraction", ea.sample_fraction, "Sampling fraction");
    extend_cmd->add_option("--seed", ea.seed, "Seed");
    extend_cmd->add_option("--log-every", ea.log_every, "History stride");
    extend_cmd->add_option("--history", ea.history_path, "History CSV path");
    extend_cmd->add_option("--init", ea.init_rule, "mirror, clamp or random");
    extend_cmd->add_flag("--freeze-old", ea.freeze_old, "Freeze pre-existing local slices");

    std::string rec_model, rec_out, rec_resolution, rec_like;
    double rec_fill = 0.0;
    int rec_rate = 16000;
    auto* rec_cmd = app.add_subcommand("reconstruct", "Decode a model onto a grid");
    rec_cmd->add_option("--model", rec_model, "Input model")->required();
    rec_cmd->add_option("--out", rec_out, "Output PGM/PPM/WAV")->required();
    rec_cmd->add_option("--resolution", rec_resolution, "Grid resolution, e.g. 512,512");
    rec_cmd->add_option("--like", rec_like, "Copy resolution (and rate) from this signal");
    rec_cmd->add_option("--fill", rec_fill, "Value for cropped partitions, in [-1,1]");
    rec_cmd->add_option("--sample-rate", rec_rate, "WAV sample rate");

    std::string eval_model, eval_ref;
    auto* eval_cmd = app.add_subcommand("eval", "Compare a model against a reference signal");
    eval_cmd->add_option("--model", eval_model, "Input model")->required();
    eval_cmd->add_option("--ref", eval_ref, "Reference signal")->required();

    std::string info_model;
    auto* info_cmd = app.add_subcommand("info", "Describe a model file");
    info_cmd->add_option("--model", info_model, "Input model")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(ta);
        if (crop_cmd->parsed()) return cmd_crop(crop_model, crop_drop, crop_out);
        if (extend_cmd->parsed()) return cmd_extend(ea);
        if (rec_cmd->parsed())
            return cmd_reconstruct(rec_model, rec_out, rec_resolution, rec_like, rec_fill,
                                   rec_rate);
        if (eval_cmd->parsed()) return cmd_eval(eval_model, eval_ref);
        if (info_cmd->parsed()) return cmd_info(info_model);
    } catch (const divergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
