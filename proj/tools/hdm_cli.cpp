// hdm: command-line front end for the heat diffusion model.

#include "hdm/hdm.hpp"
#include "hdm/png_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumeric = 2, kIo = 3 };

int exit_code(hdm::ErrorKind kind) {
    switch (kind) {
    case hdm::ErrorKind::InvalidParams:
    case hdm::ErrorKind::DimensionMismatch:
    case hdm::ErrorKind::InvalidDistribution: return kUsage;
    case hdm::ErrorKind::Io: return kIo;
    default: return kNumeric;
    }
}

struct Common {
    int rows = 8;
    int cols = 8;
    double theta = 0.5;
    std::optional<double> K;
    std::optional<double> gamma;
    int N = 20;
    std::uint64_t seed = 0;
    std::string boundary = "adiabatic";
    std::string ablation = "none";

    hdm::RunConfig config() const {
        hdm::RunConfig c;
        c.shape = {rows, cols};
        c.theta = theta;
        c.K = K;
        c.gamma = gamma;
        c.N = N;
        c.seed = seed;
        c.boundary = hdm::parse_boundary(boundary);
        c.ablation = hdm::parse_ablation(ablation);
        return c;
    }
};

hdm::OperatorSet operators_for(const hdm::RunConfig& cfg, const hdm::SchemeParams& p) {
    if (cfg.ablation == hdm::Ablation::RandomMatrix) return hdm::build_random_operators(cfg.shape, p, cfg.seed);
    return hdm::build_or_load_operators(cfg.shape, p);
}

std::string step_name(const std::string& prefix, int n, int channels) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d.%s", prefix.c_str(), n, channels == 1 ? "pgm" : "ppm");
    return buf;
}

void write_field(const fs::path& path, const hdm::ImageField& f) { hdm::write_pnm(path.string(), hdm::to_image(f)); }

std::vector<fs::path> image_files(const std::string& dir) {
    std::vector<fs::path> files;
    hdm::require(fs::is_directory(dir), hdm::ErrorKind::Io, dir + " is not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm" || ext == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    hdm::require(!files.empty(), hdm::ErrorKind::Io, dir + " contains no .pgm/.ppm/.png images");
    return files;
}

std::vector<hdm::ImageField> load_dataset(const std::string& dir) {
    std::vector<hdm::ImageField> out;
    for (const auto& f : image_files(dir)) out.push_back(hdm::to_field(hdm::read_image(f.string())));
    return out;
}

/// Flattened model-space pixels, one image per row.
hdm::FeatureSet pixel_features(const std::string& dir) {
    const auto fields = load_dataset(dir);
    const auto width = fields.front().data.size();
    hdm::FeatureSet set{hdm::Matrix(Eigen::Index(fields.size()), width)};
    for (std::size_t i = 0; i < fields.size(); ++i) {
        hdm::require(fields[i].data.size() == width, hdm::ErrorKind::DimensionMismatch, "images differ in size");
        set.rows.row(Eigen::Index(i)) = Eigen::Map<const hdm::Vector>(fields[i].data.data(), width).transpose();
    }
    return set;
}

void print_field_stats(std::ostream& out, int n, const hdm::ImageField& f) {
    const double mean = f.data.mean();
    const double var = (f.data.array() - mean).square().sum() / double(f.data.size());
    out << n << ',' << mean << ',' << var << ',' << f.data.minCoeff() << ',' << f.data.maxCoeff() << '\n';
}

// --- subcommands ---------------------------------------------------------------

int cmd_build_op(const Common& common, const std::string& out_path) {
    const auto cfg = common.config();
    const auto params = cfg.scheme();
    if (cfg.gamma) std::printf("K = %.15g (from gamma = %g)\n", params.K, *cfg.gamma);
    const auto start = std::chrono::steady_clock::now();
    const auto ops = cfg.ablation == hdm::Ablation::RandomMatrix ? hdm::build_random_operators(cfg.shape, params, cfg.seed)
                                                                 : hdm::build_operators(cfg.shape, params);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::printf("grid %dx%d, theta = %g, K = %.15g, boundary = %s%s\n", cfg.shape.rows, cfg.shape.cols, params.theta,
                params.K, hdm::to_string(params.boundary), ops.ablation ? ", ablation = random_matrix" : "");
    if (ops.is_identity()) std::printf("A = identity (DDPM mode)\n");
    std::printf("S row 0:");
    for (Eigen::Index c = 0; c < ops.size(); ++c) std::printf(" %.15g", ops.S(0, c));
    std::printf("\nT row 0:");
    for (Eigen::Index c = 0; c < ops.size(); ++c) std::printf(" %.15g", ops.T(0, c));
    std::printf("\nmax row-sum deviation: %.3e\n", hdm::max_row_sum_deviation(ops));
    std::printf("spectral radius(A): %.15g\n", hdm::spectral_radius(ops.A));
    std::printf("condition estimate: S %.6g, A %.6g\n", ops.condition_S, ops.condition_A);
    std::printf("build time: %.3f s\n", secs);

    if (!ops.ablation) {
        std::string path = out_path;
        if (path.empty()) {
            const auto dir = hdm::operator_cache_dir().value_or(fs::path("."));
            fs::create_directories(dir);
            path = (dir / hdm::operator_cache_name(cfg.shape, params)).string();
        }
        hdm::save_operator_cache(path, ops);
        std::printf("wrote %s\n", path.c_str());
    }
    return kOk;
}

int cmd_schedule(const Common& common, const std::string& out_path) {
    const auto s = hdm::linear_schedule(common.N);
    if (out_path.empty()) {
        hdm::write_schedule_csv(std::cout, s);
        return kOk;
    }
    std::ofstream out(out_path);
    hdm::require(bool(out), hdm::ErrorKind::Io, "cannot write " + out_path);
    hdm::write_schedule_csv(out, s);
    return kOk;
}

struct DiffuseArgs {
    std::string input;
    std::string out_dir = "diffuse_out";
    int stride = 0;
    bool zero_noise = false;
};

int cmd_diffuse(Common common, const DiffuseArgs& a) {
    const auto u0 = hdm::to_field(hdm::read_image(a.input));
    common.rows = u0.shape.rows;
    common.cols = u0.shape.cols;
    const auto cfg = common.config();
    const auto params = cfg.scheme();
    const auto ops = operators_for(cfg, params);
    const auto schedule = hdm::linear_schedule(cfg.N);
    const int stride = a.stride > 0 ? a.stride : std::max(1, cfg.N / 10);

    fs::create_directories(a.out_dir);
    std::ofstream csv(fs::path(a.out_dir) / "stats.csv");
    hdm::require(bool(csv), hdm::ErrorKind::Io, "cannot write stats.csv in " + a.out_dir);
    csv << "n,mean,variance,min,max\n";
    csv.precision(17);

    std::mt19937_64 rng(cfg.seed);
    hdm::ImageField u = u0;
    print_field_stats(csv, 0, u);
    write_field(fs::path(a.out_dir) / step_name("u", 0, u.channels()), u);
    for (int n = 1; n <= cfg.N; ++n) {
        const hdm::Matrix eps = a.zero_noise ? hdm::Matrix::Zero(u.data.rows(), u.data.cols())
                                             : hdm::standard_normal(u.data.rows(), u.data.cols(), rng);
        u = hdm::forward_step_with_noise(ops, schedule, u, n, eps).u_n;
        print_field_stats(csv, n, u);
        if (n % stride == 0 || n == cfg.N) write_field(fs::path(a.out_dir) / step_name("u", n, u.channels()), u);
    }
    std::printf("diffused %s for N = %d steps into %s\n", a.input.c_str(), cfg.N, a.out_dir.c_str());
    return kOk;
}

struct TrainArgs {
    std::string data_dir;
    int blobs = 100;
    int epochs = 5;
    int batch = 1;
    double eta = 1e-10;
    std::string loss_log = "loss.csv";
    std::string checkpoint = "predictor.hdmpr";
    std::size_t cache_size = 8;
};

int cmd_train(Common common, const TrainArgs& a) {
    std::vector<hdm::ImageField> data;
    if (!a.data_dir.empty()) {
        data = load_dataset(a.data_dir);
        common.rows = data.front().shape.rows;
        common.cols = data.front().shape.cols;
    }
    const auto cfg = common.config();
    if (a.data_dir.empty()) data = hdm::gaussian_blobs(cfg.shape, a.blobs, cfg.seed);
    const auto params = cfg.scheme();
    const auto ops = operators_for(cfg, params);
    const auto schedule = hdm::linear_schedule(cfg.N);

    hdm::TrainConfig tc;
    tc.epochs = a.epochs;
    tc.batch = a.batch;
    tc.eta = a.eta;
    tc.seed = cfg.seed;
    tc.N = cfg.N;
    tc.loss_log_path = a.loss_log;
    hdm::StepCache cache(ops, schedule, a.cache_size);
    const auto result = hdm::train(data, tc, ops, schedule, hdm::LinearPredictor(ops.size()), cache);
    hdm::save_predictor(a.checkpoint, result.predictor, ops.shape, data.front().channels());

    const auto& log = result.log;
    std::printf("trained %zu steps on %zu fields\n", log.size(), data.size());
    if (!log.empty()) {
        const std::size_t first = std::min<std::size_t>(log.size(), hdm::kRunningMeanWindow) - 1;
        std::printf("running mean loss: first window %.6g, last window %.6g\n", log[first].running_mean,
                    log.back().running_mean);
    }
    std::printf("wrote %s and %s\n", a.loss_log.c_str(), a.checkpoint.c_str());
    return kOk;
}

struct SampleArgs {
    std::string checkpoint;
    std::string out = "sample.pgm";
    std::string snapshot_dir;
    std::string from;
    int n_start = 0;
    int channels = 1;
    int stride = 0;
    bool noisy_final = false;
};

int cmd_sample(Common common, const SampleArgs& a) {
    std::optional<hdm::ImageField> start;
    if (!a.from.empty()) {
        start = hdm::to_field(hdm::read_image(a.from));
        common.rows = start->shape.rows;
        common.cols = start->shape.cols;
    }
    const auto cfg = common.config();
    const auto params = cfg.scheme();
    const auto ops = operators_for(cfg, params);
    const auto schedule = hdm::linear_schedule(cfg.N);
    const int channels = start ? start->channels() : a.channels;

    hdm::LinearPredictor predictor(ops.size());
    if (!a.checkpoint.empty()) predictor = hdm::load_predictor(a.checkpoint, ops.shape, channels);

    hdm::SamplerOptions opts;
    opts.snapshot_stride = a.snapshot_dir.empty() ? 0 : std::max(1, a.stride);
    opts.noisy_final = a.noisy_final;

    hdm::SampleTrace trace;
    if (start) {
        const int n_start = a.n_start > 0 ? a.n_start : cfg.N / 2;
        std::mt19937_64 rng(cfg.seed);
        const auto noised = hdm::forward_jump(ops, schedule, *start, n_start, rng);
        trace.seed = cfg.seed;
        trace.u0 = hdm::denoise_from(ops, schedule, predictor, noised.u_n, n_start, rng, opts, &trace);
    } else {
        trace = hdm::sample(ops, schedule, predictor, cfg.seed, channels, opts);
    }
    write_field(a.out, trace.u0);
    if (!a.snapshot_dir.empty()) {
        fs::create_directories(a.snapshot_dir);
        for (const auto& [n, f] : trace.snapshots) write_field(fs::path(a.snapshot_dir) / step_name("u", n, channels), f);
    }
    std::printf("wrote %s\n", a.out.c_str());
    return kOk;
}

struct FidArgs {
    std::string x, y, x_dir, y_dir;
};

int cmd_fid(const FidArgs& a) {
    if (!a.x_dir.empty() || !a.y_dir.empty()) {
        hdm::require(!a.x_dir.empty() && !a.y_dir.empty(), hdm::ErrorKind::InvalidParams, "--x-dir needs --y-dir");
        const double v = hdm::fid(pixel_features(a.x_dir), pixel_features(a.y_dir));
        std::printf("pixel-FID %.10g\n", v);
        return kOk;
    }
    hdm::require(!a.x.empty() && !a.y.empty(), hdm::ErrorKind::InvalidParams, "fid needs --x and --y");
    const double v = hdm::fid({hdm::read_csv_matrix(a.x)}, {hdm::read_csv_matrix(a.y)});
    std::printf("%.10g\n", v);
    return kOk;
}

int cmd_is(const std::string& probs) {
    std::printf("%.10g\n", hdm::inception_score({hdm::read_csv_matrix(probs)}));
    return kOk;
}

struct CheckArgs {
    bool fast = false;
    int dump_step = 0;
    std::string dump_dir = ".";
};

int cmd_check(const Common& common, const CheckArgs& a) {
    const auto cfg = common.config();
    const auto params = cfg.scheme();
    if (a.dump_step > 0) {
        const auto ops = operators_for(cfg, params);
        const auto schedule = hdm::linear_schedule(cfg.N);
        const auto m = hdm::step_matrices(ops, schedule, a.dump_step);
        fs::create_directories(a.dump_dir);
        const auto dump = [&](const char* name, const hdm::Matrix& mat) {
            const auto path = fs::path(a.dump_dir) / (std::string(name) + "_" + std::to_string(a.dump_step) + ".csv");
            std::ofstream out(path);
            hdm::require(bool(out), hdm::ErrorKind::Io, "cannot write " + path.string());
            hdm::write_csv_matrix(out, mat);
            std::printf("wrote %s\n", path.string().c_str());
        };
        dump("Sigma", m.Sigma);
        dump("C", m.C);
        dump("D", m.D);
        return kOk;
    }

    hdm::CheckOptions o;
    o.theta = params.theta;
    o.K = params.K;
    o.ablation = cfg.ablation;
    o.seed = cfg.seed;
    o.fast = a.fast;
    const auto start = std::chrono::steady_clock::now();
    const auto results = hdm::run_property_checks(o);
    bool ok = true;
    for (const auto& r : results) {
        std::printf("[%s] %-48s %s (%.2fs)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
        ok = ok && r.passed;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s: %zu checks in %.2fs\n", ok ? "all passed" : "FAILURES", results.size(), secs);
    return ok ? kOk : kNumeric;
}

int cmd_make_blobs(const Common& common, int count, const std::string& out_dir) {
    const auto cfg = common.config();
    fs::create_directories(out_dir);
    const auto blobs = hdm::gaussian_blobs(cfg.shape, count, cfg.seed);
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "blob_%03zu.pgm", i);
        write_field(fs::path(out_dir) / name, blobs[i]);
    }
    std::printf("wrote %d blobs to %s\n", count, out_dir.c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heat diffusion model: operators, diffusion, training, sampling and metrics"};
    app.set_config("--config", "", "flat 'key = value' file; command-line flags override it");
    app.require_subcommand(1);

    Common common;
    app.add_option("--I", common.rows, "grid rows")->check(CLI::PositiveNumber);
    app.add_option("--J", common.cols, "grid columns")->check(CLI::PositiveNumber);
    app.add_option("--theta", common.theta, "theta-scheme weight (0.5 = Crank-Nicolson)");
    auto* k_opt = app.add_option("--K", common.K, "diffusion number kappa*tau/Delta^2");
    auto* g_opt = app.add_option("--gamma", common.gamma, "grid points travelled per step; sets K = gamma^2/4");
    k_opt->excludes(g_opt);
    app.add_option("--N", common.N, "number of diffusion steps");
    app.add_option("--seed", common.seed, "random seed");
    app.add_option("--boundary", common.boundary, "adiabatic | fixed_zero");
    app.add_option("--ablation", common.ablation, "none | random_matrix");

    std::string out_path;
    auto* build = app.add_subcommand("build-op", "build S, T, A, print diagnostics and write an HDMOP1 cache")->fallthrough();
    build->add_option("--out", out_path, "cache file (default: $HDM_CACHE_DIR or . with a parameter-encoding name)");

    std::string schedule_out;
    auto* sched = app.add_subcommand("schedule", "write the beta/alpha/alpha_bar schedule as CSV")->fallthrough();
    sched->add_option("--out", schedule_out, "CSV path (default: stdout)");

    DiffuseArgs diffuse;
    auto* diff = app.add_subcommand("diffuse", "run the forward process on an image")->fallthrough();
    diff->add_option("--input", diffuse.input, "PGM/PPM/PNG image")->required();
    diff->add_option("--out-dir", diffuse.out_dir, "snapshot and stats.csv directory");
    diff->add_option("--stride", diffuse.stride, "snapshot stride (default N/10)");
    diff->add_flag("--zero-noise", diffuse.zero_noise, "replace every noise draw by 0");

    TrainArgs train;
    auto* tr = app.add_subcommand("train", "train the linear noise predictor with SGD")->fallthrough();
    tr->add_option("--data", train.data_dir, "directory of training images (default: synthetic blobs)");
    tr->add_option("--blobs", train.blobs, "number of synthetic blobs when --data is absent");
    tr->add_option("--epochs", train.epochs, "passes over the dataset");
    tr->add_option("--batch", train.batch, "fields per SGD step");
    tr->add_option("--eta", train.eta, "learning rate");
    tr->add_option("--loss-log", train.loss_log, "loss CSV path");
    tr->add_option("--checkpoint", train.checkpoint, "HDMPR1 checkpoint output");
    tr->add_option("--cache-size", train.cache_size, "step-matrix LRU capacity");

    SampleArgs sample;
    auto* sa = app.add_subcommand("sample", "generate an image by ancestral sampling")->fallthrough();
    sa->add_option("--checkpoint", sample.checkpoint, "HDMPR1 checkpoint (default: zero predictor)");
    sa->add_option("--out", sample.out, "output PGM/PPM");
    sa->add_option("--snapshots", sample.snapshot_dir, "directory for intermediate u_n");
    sa->add_option("--stride", sample.stride, "snapshot stride");
    sa->add_option("--channels", sample.channels, "channels of the generated field");
    sa->add_option("--from", sample.from, "noise this image to --n-start and denoise it instead");
    sa->add_option("--n-start", sample.n_start, "starting step for --from (default N/2)");
    sa->add_flag("--noisy-final", sample.noisy_final, "add unit-covariance noise at the last step as well");

    FidArgs fid;
    auto* fi = app.add_subcommand("fid", "Frechet distance between two feature sets")->fallthrough();
    fi->add_option("--x", fid.x, "CSV features, one row per sample");
    fi->add_option("--y", fid.y, "CSV features, one row per sample");
    fi->add_option("--x-dir", fid.x_dir, "image directory; raw pixels as features (pixel-FID)");
    fi->add_option("--y-dir", fid.y_dir, "image directory; raw pixels as features (pixel-FID)");

    std::string probs;
    auto* is = app.add_subcommand("is", "inception score of a class-probability CSV")->fallthrough();
    is->add_option("--probs", probs, "CSV, one probability row per sample")->required();

    CheckArgs check;
    auto* ch = app.add_subcommand("check", "run the property and oracle suite")->fallthrough();
    ch->add_flag("--fast", check.fast, "skip Monte-Carlo checks");
    ch->add_option("--dump-step", check.dump_step, "write Sigma_n, C_n, D_n as CSV for this n and exit");
    ch->add_option("--dump-dir", check.dump_dir, "directory for --dump-step output");

    int blob_count = 100;
    std::string blob_dir = "blobs";
    auto* mb = app.add_subcommand("make-blobs", "write the synthetic Gaussian-blob dataset as PGM")->fallthrough();
    mb->add_option("--count", blob_count, "number of images");
    mb->add_option("--out-dir", blob_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*build) return cmd_build_op(common, out_path);
        if (*sched) return cmd_schedule(common, schedule_out);
        if (*diff) return cmd_diffuse(common, diffuse);
        if (*tr) return cmd_train(common, train);
        if (*sa) return cmd_sample(common, sample);
        if (*fi) return cmd_fid(fid);
        if (*is) return cmd_is(probs);
        if (*ch) return cmd_check(common, check);
        if (*mb) return cmd_make_blobs(common, blob_count, blob_dir);
    } catch (const hdm::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIo;
    }
    return kUsage;
}
