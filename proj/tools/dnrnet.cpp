#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "dnr/config.hpp"
#include "dnr/dataset.hpp"
#include "dnr/dnrnet.hpp"
#include "dnr/errors.hpp"
#include "dnr/io.hpp"
#include "dnr/metrics.hpp"
#include "dnr/osem.hpp"
#include "dnr/phantom.hpp"
#include "dnr/train.hpp"

namespace fs = std::filesystem;
using namespace dnr;

namespace {

enum Exit : int { ok = 0, config_error = 2, io_error = 3, divergence = 4, geometry_mismatch = 5 };

struct Common {
    std::string config_path;
    int threads = -1;
};

// Flag values that override the config file; unset optionals keep the file value.
struct SimulateFlags {
    std::optional<int> size, n, views;
    std::optional<std::uint64_t> seed;
    std::optional<double> counts;
    std::string phantom;
    std::string out;
};

struct TrainFlags {
    std::string dataset, out, report;
    std::optional<int> epochs, blocks, channels, batch, size;
    std::optional<double> lr, eps;
    std::optional<std::uint64_t> seed;
};

struct ReconstructFlags {
    std::string method = "dnr";
    std::string checkpoint, sinogram, init, out;
    std::optional<int> iterations, subsets, n;
    std::optional<double> butterworth;
};

struct EvaluateFlags {
    std::string truth, spec, csv;
    std::vector<std::string> recons;
};

template <typename V>
void apply(const std::optional<V>& flag, V& field) {
    if (flag) field = *flag;
}

RunConfig load_config(const Common& common) {
    RunConfig cfg = common.config_path.empty() ? RunConfig{} : load_run_config(common.config_path);
    if (common.threads >= 0) cfg.threads = common.threads;
    return cfg;
}

void set_threads(const RunConfig& cfg) {
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
}

fs::path with_extension(fs::path p, const char* ext) {
    p.replace_extension(ext);
    return p;
}

void write_image(const fs::path& csv, const Image& img) {
    io::write_image_csv(csv, img);
    io::write_image_pgm(with_extension(csv, ".pgm"), img);
}

int cmd_simulate(const Common& common, const SimulateFlags& f) {
    RunConfig cfg = load_config(common);
    apply(f.size, cfg.dataset_size);
    apply(f.seed, cfg.dataset_seed);
    apply(f.n, cfg.geometry.n);
    apply(f.views, cfg.geometry.views);
    apply(f.counts, cfg.total_counts);
    cfg.validate();
    set_threads(cfg);

    const Geometry geom = cfg.geometry.build();
    const SystemMatrix A = build_system_matrix(geom);
    const fs::path out(f.out);

    if (!f.phantom.empty()) {
        const PhantomSpec spec = preset_phantom(f.phantom, geom.n);
        const Sample s = simulate_sample(spec, A, cfg.total_counts, cfg.dataset_seed);
        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec) throw IoError("cannot create " + out.string());
        save_phantom(out / "phantom.json", spec);
        write_image(out / "truth.csv", s.truth);
        io::write_sinogram_csv(out / "sinogram.csv", s.sinogram);
        io::write_sinogram_pgm(out / "sinogram.pgm", s.sinogram);
        std::printf("simulated phantom %s (n=%d, views=%d, seed %llu) -> %s\n", f.phantom.c_str(), geom.n,
                    geom.views, static_cast<unsigned long long>(cfg.dataset_seed), out.string().c_str());
        return ok;
    }

    const Dataset ds = generate_dataset(cfg.limits, cfg.dataset_config(), A);
    save_dataset(out, ds);
    std::printf("simulated %zu samples (seed %llu) -> %s\n", ds.samples.size(),
                static_cast<unsigned long long>(cfg.dataset_seed), out.string().c_str());
    return ok;
}

int cmd_train(const Common& common, const TrainFlags& f) {
    RunConfig cfg = load_config(common);
    apply(f.epochs, cfg.train.epochs);
    apply(f.blocks, cfg.network.n_blocks);
    apply(f.channels, cfg.network.channels);
    apply(f.batch, cfg.train.batch_size);
    apply(f.size, cfg.train.limit);
    apply(f.lr, cfg.train.lr);
    apply(f.eps, cfg.operator_eps);
    apply(f.seed, cfg.model_seed);
    cfg.validate();
    set_threads(cfg);

    const Dataset ds = load_dataset(f.dataset);
    auto A = std::make_shared<const SystemMatrix>(build_system_matrix(ds.geometry));
    DnrNet<float> model(A, cfg.network, cfg.operator_config());
    model.init(cfg.model_seed);

    const TrainingReport report = train(model, ds, cfg.train, [](const EpochLoss& e) {
        std::printf("epoch %3d  train_mse %.6g  val_mse %.6g\n", e.epoch, e.train_mse, e.val_mse);
        std::fflush(stdout);
    });

    const fs::path out(f.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_model(model, out);
    const fs::path report_path = f.report.empty() ? with_extension(out, ".report.csv") : fs::path(f.report);
    io::write_text(report_path, report.to_csv());
    std::printf("final validation MSE %.6g\n", report.epochs.back().val_mse);
    return ok;
}

int cmd_reconstruct(const Common& common, const ReconstructFlags& f) {
    RunConfig cfg = load_config(common);
    apply(f.iterations, cfg.osem.iterations);
    apply(f.subsets, cfg.osem.subsets);
    apply(f.n, cfg.geometry.n);
    if (f.butterworth) cfg.butterworth.cutoff = *f.butterworth;
    if (f.method != "dnr" && f.method != "osem") throw ConfigError("--method must be dnr or osem");
    if (f.method == "dnr" && f.checkpoint.empty()) throw ConfigError("--method dnr needs --checkpoint");
    cfg.validate();
    set_threads(cfg);

    const Sinogram y = io::read_sinogram_csv(f.sinogram);
    Image result;
    if (f.method == "dnr") {
        const DnrNet<float> model = load_model(f.checkpoint);
        check_sinogram(model.system_matrix(), y);
        result = model.reconstruct(y);
    } else {
        const SystemMatrix A = build_system_matrix(cfg.geometry.build());
        check_sinogram(A, y);
        std::optional<Image> initial;
        if (!f.init.empty()) initial = io::read_image_csv(f.init);
        result = osem_reconstruct(y, A, cfg.osem, initial);
        if (f.butterworth) result = butterworth_filter(result, cfg.butterworth);
    }
    const fs::path out(f.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_image(out, result);
    std::printf("wrote %dx%d reconstruction -> %s\n", result.n, result.n, out.string().c_str());
    return ok;
}

int cmd_evaluate(const Common& common, const EvaluateFlags& f) {
    RunConfig cfg = load_config(common);
    cfg.validate();
    set_threads(cfg);

    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& r : f.recons) {
        const auto eq = r.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == r.size())
            throw ConfigError("--recon expects NAME=PATH, got '" + r + "'");
        entries.emplace_back(r.substr(0, eq), r.substr(eq + 1));
    }

    const Image truth = io::read_image_csv(f.truth);
    const PhantomSpec spec = load_phantom(f.spec);
    std::vector<NamedImage> recons;
    for (const auto& [name, path] : entries) recons.push_back({name, io::read_image_csv(path)});

    const auto rows = score_table(recons, truth, spec);
    std::fputs(format_score_table(rows).c_str(), stdout);
    if (!f.csv.empty()) io::write_text(f.csv, score_table_csv(rows));
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unrolled Newton network for emission tomography"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config_path, "JSON run configuration; flags override it");
    app.add_option("--threads", common.threads, "Worker thread cap (1 = bit-reproducible)");

    SimulateFlags sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate a training dataset or a named phantom");
    simulate->fallthrough();
    simulate->add_option("--out", sim.out, "Output directory")->required();
    simulate->add_option("--size", sim.size, "Number of samples");
    simulate->add_option("--seed", sim.seed, "Dataset seed");
    simulate->add_option("--n", sim.n, "Image side in pixels");
    simulate->add_option("--views", sim.views, "Projection views");
    simulate->add_option("--counts", sim.counts, "Total expected counts per sinogram");
    simulate->add_option("--phantom", sim.phantom, "Simulate one preset phantom (A, B, shepp_logan)");

    TrainFlags tr;
    auto* training = app.add_subcommand("train", "Train a model on a simulated dataset");
    training->fallthrough();
    training->add_option("--dataset", tr.dataset, "Dataset directory")->required();
    training->add_option("--out", tr.out, "Checkpoint manifest path")->required();
    training->add_option("--report", tr.report, "Epoch loss CSV (default: <out>.report.csv)");
    training->add_option("--epochs", tr.epochs, "Training epochs");
    training->add_option("--blocks", tr.blocks, "Unrolled blocks");
    training->add_option("--channels", tr.channels, "Hidden channels per operator");
    training->add_option("--batch", tr.batch, "Batch size");
    training->add_option("--size", tr.size, "Use only the first K samples");
    training->add_option("--lr", tr.lr, "Adam learning rate");
    training->add_option("--seed", tr.seed, "Model initialization seed");
    training->add_option("--operator-eps", tr.eps, "Count floor inside the network's linear operator");

    ReconstructFlags rc;
    auto* recon = app.add_subcommand("reconstruct", "Reconstruct one sinogram");
    recon->fallthrough();
    recon->add_option("--method", rc.method, "dnr or osem")->capture_default_str();
    recon->add_option("--checkpoint", rc.checkpoint, "Model checkpoint (dnr)");
    recon->add_option("--sinogram", rc.sinogram, "Sinogram CSV")->required();
    recon->add_option("--out", rc.out, "Output CSV; a PGM is written next to it")->required();
    recon->add_option("--iterations", rc.iterations, "OSEM iterations");
    recon->add_option("--subsets", rc.subsets, "OSEM subsets");
    recon->add_option("--butterworth", rc.butterworth, "Butterworth cutoff (cycles/pixel) after OSEM");
    recon->add_option("--init", rc.init, "Initial image CSV for OSEM");
    recon->add_option("--n", rc.n, "Image side for OSEM");

    EvaluateFlags ev;
    auto* evaluate = app.add_subcommand("evaluate", "Score reconstructions with SSIM and CNR");
    evaluate->fallthrough();
    evaluate->add_option("--truth", ev.truth, "Ground truth image CSV")->required();
    evaluate->add_option("--spec", ev.spec, "Phantom spec JSON (ROI and background masks)")->required();
    evaluate->add_option("--recon", ev.recons, "NAME=PATH, repeatable")->required();
    evaluate->add_option("--csv", ev.csv, "Also write the table as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc_parse = app.exit(e);
        return rc_parse == 0 ? ok : config_error;
    }

    try {
        if (*simulate) return cmd_simulate(common, sim);
        if (*training) return cmd_train(common, tr);
        if (*recon) return cmd_reconstruct(common, rc);
        return cmd_evaluate(common, ev);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return config_error;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "geometry mismatch: %s\n", e.what());
        return geometry_mismatch;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "training diverged: %s\n", e.what());
        return divergence;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return io_error;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "invalid input data: %s\n", e.what());
        return io_error;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return io_error;
    }
}
