#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "pivot/data.hpp"
#include "pivot/evalkit.hpp"
#include "pivot/model.hpp"
#include "pivot/pipeline.hpp"
#include "pivot/trainer.hpp"

namespace fs = std::filesystem;
using namespace pivot;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "INI config file");
    cmd->add_option("--set", o.overrides, "section.key=value override (wins over file)");
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig cfg;
    if (!o.config_path.empty()) parse_config_file(o.config_path, cfg);
    for (const auto& kv : o.overrides) apply_config_override(kv, cfg);
    return cfg;
}

bool parse_onoff(const std::string& s, bool* out) {
    if (s == "on") *out = true;
    else if (s == "off") *out = false;
    else return false;
    return true;
}

std::optional<uint64_t> read_meta_hash(const fs::path& dir) {
    std::ifstream f(dir / "meta.txt");
    std::string line;
    while (std::getline(f, line))
        if (line.rfind("config_hash=", 0) == 0)
            return std::stoull(line.substr(12), nullptr, 16);
    return std::nullopt;
}

void write_meta_hash(const fs::path& dir, uint64_t hash) {
    std::ofstream f(dir / "meta.txt");
    f << "config_hash=" << std::hex << hash << "\n";
}

int load_model_checked(Model& model, const std::string& checkpoint,
                       bool allow_mismatch) {
    if (!fs::exists(checkpoint)) {
        std::cerr << "error: checkpoint not found: " << checkpoint << "\n";
        return kExitUsage;
    }
    const uint64_t stored = model.load(checkpoint);
    if (stored != model.cfg.hash() && !allow_mismatch) {
        std::cerr << "error: checkpoint config hash mismatch (stored " << std::hex
                  << stored << ", current " << model.cfg.hash() << std::dec
                  << "); pass --allow-hash-mismatch to override\n";
        return kExitUsage;
    }
    return kExitOk;
}

int cmd_synth(const CommonOpts& common, const std::string& out_dir) {
    const RunConfig cfg = resolve_config(common);
    auto suites = make_suites(cfg.synth);
    for (const auto& [name, specs] : suites) {
        std::vector<SequenceRecord> recs;
        for (const auto& sp : specs) recs.push_back(generate_synthetic(sp));
        const fs::path dir = fs::path(out_dir) / name;
        write_suite(dir.string(), recs);
        std::cout << "suite " << name << " sequences=" << recs.size() << " dir=" << dir
                  << "\n";
    }
    std::cout << "config_hash=" << std::hex << cfg.hash() << "\n";
    return kExitOk;
}

int cmd_train(const CommonOpts& common, const std::string& data_dir,
              const std::string& layout_s, const std::string& checkpoint_out,
              const std::string& init_checkpoint, int stages,
              const std::string& loss_log, bool allow_mismatch) {
    const RunConfig cfg = resolve_config(common);
    LoadResult data = load_dataset(data_dir, layout_from_string(layout_s));
    for (const auto& e : data.errors) std::cerr << "warning: " << e << "\n";
    if (data.sequences.empty()) {
        std::cerr << "error: no usable sequences in " << data_dir << "\n";
        return kExitUsage;
    }
    Model model(cfg);
    if (stages == 2 && !init_checkpoint.empty()) {
        if (int rc = load_model_checked(model, init_checkpoint, allow_mismatch)) return rc;
    } else if (stages == 2 && init_checkpoint.empty()) {
        std::cerr << "error: stage 2 alone requires --init-checkpoint\n";
        return kExitUsage;
    }

    std::ofstream log;
    if (!loss_log.empty()) log.open(loss_log);
    TrainResult tr;
    if (stages == 0) {
        tr = run_training(model, data.sequences, loss_log.empty() ? nullptr : &log, 2);
    } else {
        std::mt19937_64 rng(cfg.seed ^ 0x747261696eULL);
        run_stage(model, data.sequences, stages, tr, rng,
                  loss_log.empty() ? nullptr : &log);
    }
    if (tr.diverged) std::cerr << "warning: training diverged; last finite state kept\n";
    if (!checkpoint_out.empty()) {
        fs::create_directories(fs::path(checkpoint_out).parent_path().empty()
                                   ? "."
                                   : fs::path(checkpoint_out).parent_path().string());
        model.save(checkpoint_out);
        std::cout << "checkpoint=" << checkpoint_out << "\n";
    }
    std::cout << "steps=" << tr.records.size() << " diverged=" << tr.diverged
              << " config_hash=" << std::hex << cfg.hash() << "\n";
    return tr.diverged ? kExitRuntime : kExitOk;
}

int run_track(const RunConfig& cfg_in, Model& model, const std::string& data_dir,
              const std::string& layout_s, const std::string& out_dir, bool prompt,
              bool tpr) {
    RunConfig cfg = cfg_in;
    cfg.track.prompt_enabled = prompt;
    cfg.track.tpr_enabled = tpr;
    LoadResult data = load_dataset(data_dir, layout_from_string(layout_s));
    for (const auto& e : data.errors) std::cerr << "warning: " << e << "\n";
    Tracker tracker(model, cfg.track, cfg.tpr, cfg.sigma_factor);
    fs::create_directories(out_dir);
    const OpeOutcome outcome = run_ope(tracker, data.sequences, cfg.track.parallelism);
    for (const auto& e : outcome.errors) std::cerr << "sequence failed: " << e << "\n";
    for (const auto& r : outcome.results) {
        write_result_file((fs::path(out_dir) / (r.name + ".txt")).string(), r.pred);
        write_confidence_file(
            (fs::path(out_dir) / (r.name + "_confidence.txt")).string(), r.confidence);
    }
    write_meta_hash(out_dir, cfg_in.hash());
    return kExitOk;
}

int cmd_track(const CommonOpts& common, const std::string& checkpoint,
              const std::string& data_dir, const std::string& layout_s,
              const std::string& out_dir, const std::string& tpr_s,
              const std::string& prompt_s, bool allow_mismatch) {
    const RunConfig cfg = resolve_config(common);
    bool tpr = true, prompt = true;
    if (!parse_onoff(tpr_s, &tpr) || !parse_onoff(prompt_s, &prompt)) {
        std::cerr << "error: --tpr/--prompt take on|off\n";
        return kExitUsage;
    }
    Model model(cfg);
    if (int rc = load_model_checked(model, checkpoint, allow_mismatch)) return rc;
    return run_track(cfg, model, data_dir, layout_s, out_dir, prompt, tpr);
}

int cmd_eval(const CommonOpts& common, const std::string& results_dir,
             const std::string& checkpoint, const std::string& data_dir,
             const std::string& layout_s, const std::string& attributes_file,
             const std::string& report_out, bool allow_mismatch) {
    const RunConfig cfg = resolve_config(common);
    LoadResult data = load_dataset(data_dir, layout_from_string(layout_s));
    for (const auto& e : data.errors) std::cerr << "warning: " << e << "\n";
    if (!attributes_file.empty()) {
        // one "name attr1 attr2 ..." line per sequence
        std::ifstream f(attributes_file);
        std::string line;
        std::map<std::string, std::vector<std::string>> tags;
        while (std::getline(f, line)) {
            std::istringstream ls(line);
            std::string name, a;
            if (!(ls >> name)) continue;
            while (ls >> a) tags[name].push_back(a);
        }
        for (auto& seq : data.sequences)
            if (auto it = tags.find(seq.name); it != tags.end())
                seq.attributes = it->second;
    }

    OpeOutcome outcome;
    if (!results_dir.empty()) {
        if (auto h = read_meta_hash(results_dir);
            h && *h != cfg.hash() && !allow_mismatch) {
            std::cerr << "error: results config hash mismatch; pass "
                         "--allow-hash-mismatch to override\n";
            return kExitUsage;
        }
        outcome = run_ope_files(results_dir, data.sequences);
    } else if (!checkpoint.empty()) {
        Model model(cfg);
        if (int rc = load_model_checked(model, checkpoint, allow_mismatch)) return rc;
        Tracker tracker(model, cfg.track, cfg.tpr, cfg.sigma_factor);
        outcome = run_ope(tracker, data.sequences, cfg.track.parallelism);
    } else {
        std::cerr << "error: eval needs --results or --checkpoint\n";
        return kExitUsage;
    }
    for (const auto& e : outcome.errors) std::cerr << "error record: " << e << "\n";

    std::ostringstream rep;
    rep << "config_hash=" << std::hex << cfg.hash() << std::dec << "\n"
        << report_to_text(outcome.report);
    std::cout << rep.str();
    if (!report_out.empty()) {
        std::ofstream rf(report_out);
        rf << rep.str();
        attribute_report(outcome.results, report_out + ".attributes.csv");
    }
    return kExitOk;
}

int cmd_ablate(const CommonOpts& common, const std::string& checkpoint,
               const std::string& data_dir, const std::string& layout_s,
               const std::string& out_file, bool allow_mismatch) {
    const RunConfig cfg = resolve_config(common);
    Model model(cfg);
    if (int rc = load_model_checked(model, checkpoint, allow_mismatch)) return rc;
    LoadResult data = load_dataset(data_dir, layout_from_string(layout_s));
    for (const auto& e : data.errors) std::cerr << "warning: " << e << "\n";

    struct Row {
        const char* name;
        bool prompt, tpr;
    };
    const Row rows[] = {{"baseline", false, false},
                        {"no_prompt", false, true},
                        {"initial", true, false},
                        {"refined", true, true}};
    std::ostringstream table;
    table << "row,prompt,tpr,success_auc,precision_auc\n";
    for (const Row& r : rows) {
        RunConfig c = cfg;
        c.track.prompt_enabled = r.prompt;
        c.track.tpr_enabled = r.tpr;
        Tracker tracker(model, c.track, c.tpr, c.sigma_factor);
        OpeOutcome o = run_ope(tracker, data.sequences, c.track.parallelism);
        table << r.name << "," << (r.prompt ? "on" : "off") << ","
              << (r.tpr ? "on" : "off") << "," << o.report.success_auc << ","
              << o.report.precision_auc << "\n";
    }
    table << "# config_hash=" << std::hex << cfg.hash() << "\n";
    std::cout << table.str();
    if (!out_file.empty()) {
        std::ofstream f(out_file);
        f << table.str();
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pivot: promptable visual object tracker toolkit"};
    app.require_subcommand(1);

    CommonOpts common;
    std::string out_dir = "out", data_dir, layout = "got10k", checkpoint,
                init_checkpoint, loss_log, tpr_s = "on", prompt_s = "on", results_dir,
                attributes_file, report_out, out_file;
    int stages = 0;
    bool allow_mismatch = false;

    CLI::App* synth = app.add_subcommand("synth", "generate synthetic suites");
    add_common(synth, common);
    synth->add_option("--out", out_dir, "output directory");

    CLI::App* train = app.add_subcommand("train", "two-stage training");
    add_common(train, common);
    train->add_option("--data", data_dir, "dataset root")->required();
    train->add_option("--layout", layout, "otb|lasot|got10k");
    train->add_option("--checkpoint", checkpoint, "output checkpoint path");
    train->add_option("--init-checkpoint", init_checkpoint, "stage-1 checkpoint");
    train->add_option("--stage", stages, "0 = both stages, 1 or 2 = single stage");
    train->add_option("--loss-log", loss_log, "line-delimited loss record file");
    train->add_flag("--allow-hash-mismatch", allow_mismatch);

    CLI::App* track = app.add_subcommand("track", "produce raw result files");
    add_common(track, common);
    track->add_option("--checkpoint", checkpoint)->required();
    track->add_option("--data", data_dir)->required();
    track->add_option("--layout", layout);
    track->add_option("--out", out_dir)->required();
    track->add_option("--tpr", tpr_s, "on|off");
    track->add_option("--prompt", prompt_s, "on|off");
    track->add_flag("--allow-hash-mismatch", allow_mismatch);

    CLI::App* eval = app.add_subcommand("eval", "evaluate results or a checkpoint");
    add_common(eval, common);
    eval->add_option("--results", results_dir);
    eval->add_option("--checkpoint", checkpoint);
    eval->add_option("--data", data_dir)->required();
    eval->add_option("--layout", layout);
    eval->add_option("--attributes", attributes_file);
    eval->add_option("--report", report_out);
    eval->add_flag("--allow-hash-mismatch", allow_mismatch);

    CLI::App* ablate = app.add_subcommand("ablate", "flag-matrix comparison table");
    add_common(ablate, common);
    ablate->add_option("--checkpoint", checkpoint)->required();
    ablate->add_option("--data", data_dir)->required();
    ablate->add_option("--layout", layout);
    ablate->add_option("--out", out_file);
    ablate->add_flag("--allow-hash-mismatch", allow_mismatch);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(common, out_dir);
        if (train->parsed())
            return cmd_train(common, data_dir, layout, checkpoint, init_checkpoint,
                             stages, loss_log, allow_mismatch);
        if (track->parsed())
            return cmd_track(common, checkpoint, data_dir, layout, out_dir, tpr_s,
                             prompt_s, allow_mismatch);
        if (eval->parsed())
            return cmd_eval(common, results_dir, checkpoint, data_dir, layout,
                            attributes_file, report_out, allow_mismatch);
        if (ablate->parsed())
            return cmd_ablate(common, checkpoint, data_dir, layout, out_file,
                              allow_mismatch);
    } catch (const std::runtime_error& e) {
        // config parsing problems are usage errors
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
