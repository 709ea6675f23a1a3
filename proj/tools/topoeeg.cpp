#include "topoeeg/topoeeg.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace topoeeg;

namespace {

Dataset load_data(const std::string& data, const std::string& manifest) {
    if (!manifest.empty()) return load_manifest(manifest);
    if (data.empty()) throw ValidationError("one of --data or --manifest is required");
    if (fs::is_directory(data)) return load_manifest((fs::path(data) / "manifest.json").string());
    return load_manifest(data);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    try {
        const auto j = nlohmann::json::parse(in);
        return config_from_json(j.is_array() && j.size() == 1 ? j[0] : j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config file '" + path + "': " + e.what());
    } catch (const Error& e) {
        throw ValidationError("config file '" + path + "': " + e.what());
    }
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << text;
}

void print_result(const AblationResult& r) {
    if (!r.ok()) {
        std::cout << r.id << "  error: " << r.error << '\n';
        return;
    }
    std::printf("%s  %-50s train %.4f  test %.4f  gap %+.4f  %s\n", r.id.c_str(), r.config.label().c_str(),
                r.train_accuracy, r.test_accuracy, r.gap, r.gate_passed ? "gate passed" : "gate FAILED");
}

void inspect(const Dataset& ds) {
    std::cout << ds.recordings.size() << " recording(s), " << ds.segments.size() << " segment(s)\n";
    std::vector<std::size_t> per(ds.recordings.size(), 0);
    std::map<int, std::size_t> by_label;
    for (const auto& s : ds.segments) {
        ++per[s.recording];
        ++by_label[static_cast<int>(s.label)];
    }
    for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
        const auto& r = ds.recordings[i];
        std::printf("  %-16s %3lld ch  %8.2f Hz  %9lld samples  %zu segment(s)\n", r.patient_id.c_str(),
                    static_cast<long long>(r.num_channels()), r.sample_rate, static_cast<long long>(r.num_samples()), per[i]);
        std::string ch;
        for (const auto& c : r.channels) ch += (ch.empty() ? "" : " ") + c;
        std::cout << "      channels: " << ch << '\n';
    }
    for (const auto& [l, n] : by_label) std::cout << "  " << label_name(static_cast<SegmentLabel>(l)) << ": " << n << '\n';
    const auto cc = select_common_channels(ds);
    std::string ch;
    for (const auto& c : cc.channels) ch += (ch.empty() ? "" : " ") + c;
    std::cout << "common channels (" << cc.channels.size() << ", " << cc.retained.size() << " recording(s) retained): " << ch
              << '\n';
    if (cc.warning) std::cout << "warning: no channel is shared by every recording\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topological feature pipelines for three-state iEEG classification"};
    app.require_subcommand(1);

    std::string data, manifest, grid, config, out, in;
    std::uint64_t seed = 0;
    unsigned jobs = 0;
    std::size_t top = 10;
    SynthConfig synth_cfg;

    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset (EDF files + manifest.json)");
    synth->add_option("--out", out, "Output directory")->required();
    synth->add_option("--seed", synth_cfg.seed, "Generator seed")->capture_default_str();
    synth->add_option("--per-class", synth_cfg.n_per_class, "Segments per class")->capture_default_str();
    synth->add_option("--channels", synth_cfg.channels, "Channels per recording")->capture_default_str();
    synth->add_option("--length", synth_cfg.length, "Samples per segment")->capture_default_str();
    synth->add_option("--recordings", synth_cfg.recordings, "Number of recordings")->capture_default_str();

    auto* insp = app.add_subcommand("inspect", "Summarize recordings, channels and segments");
    auto* feat = app.add_subcommand("featurize", "Write the feature matrix of one config as CSV");
    auto* run = app.add_subcommand("run", "Run one experiment config");
    auto* abl = app.add_subcommand("ablate", "Run a grid of experiment configs");
    for (auto* sc : {insp, feat, run, abl}) {
        sc->add_option("--data", data, "Dataset directory (containing manifest.json) or manifest path");
        sc->add_option("--manifest", manifest, "Manifest JSON path");
    }
    for (auto* sc : {feat, run}) sc->add_option("--config", config, "Experiment config JSON")->required();
    abl->add_option("--grid", grid, "Grid JSON (list of configs or {base, axes})")->required();
    for (auto* sc : {feat, run, abl}) {
        sc->add_option("--out", out, "Output directory")->required();
        sc->add_option("--seed", seed, "Global seed")->capture_default_str();
    }
    abl->add_option("--jobs", jobs, "Worker threads (default: available cores)");
    for (auto* sc : {run, abl}) sc->add_option("--top-k", top, "Rows in top_k.csv")->capture_default_str();

    auto* rep = app.add_subcommand("report", "Regenerate tables and plots from results.csv");
    rep->add_option("--in", in, "results.csv path")->required();
    rep->add_option("--out", out, "Output directory (default: next to results.csv)");
    rep->add_option("--top-k", top, "Rows in top_k.csv")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto ds = synth_dataset(synth_cfg);
            const auto path = write_dataset(ds, out);
            std::cout << "wrote " << ds.segments.size() << " segments in " << ds.recordings.size() << " recordings; manifest "
                      << path << '\n';
        } else if (insp->parsed()) {
            inspect(load_data(data, manifest));
        } else if (feat->parsed()) {
            const auto ds = load_data(data, manifest);
            const auto cfg = load_config(config);
            const auto fm = build_features(cfg, ds, default_split(cfg, ds, seed), seed);
            const auto path = fs::path(out) / "features.csv";
            write_file(path, feature_matrix_to_csv(fm, ds));
            std::cout << "wrote " << fm.x.rows() << " x " << fm.x.cols() << " features to " << path.string() << '\n';
        } else if (run->parsed()) {
            const auto ds = load_data(data, manifest);
            const auto cfg = load_config(config);
            const auto r = run_config(cfg, ds, seed);
            report({r}, out, top);
            write_file(fs::path(out) / "timings.csv", timings_to_csv({r}));
            print_result(r);
            if (!r.ok()) return 1;
        } else if (abl->parsed()) {
            const auto ds = load_data(data, manifest);
            const auto cfgs = load_grid(grid);
            const auto rs = ablate(cfgs, ds, jobs, seed);
            report(rs, out, top);
            write_file(fs::path(out) / "timings.csv", timings_to_csv(rs));
            std::size_t passed = 0, failed = 0;
            for (const auto& r : rs) {
                print_result(r);
                if (!r.ok()) ++failed;
                else if (r.gate_passed) ++passed;
            }
            std::cout << rs.size() << " config(s): " << passed << " gate-passing, " << failed << " error(s); results in " << out
                      << '\n';
        } else if (rep->parsed()) {
            const auto rs = load_results(in);
            const auto dir = out.empty() ? fs::path(in).parent_path().string() : out;
            report(rs, dir.empty() ? "." : dir, top, !out.empty() && fs::path(out) != fs::path(in).parent_path());
            std::cout << "report for " << rs.size() << " result(s) written to " << (dir.empty() ? "." : dir) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
