// Command-line front end: synthesize distortions, rectify, evaluate, route.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rectiwarp/errors.hpp"
#include "rectiwarp/fitter.hpp"
#include "rectiwarp/flow_io.hpp"
#include "rectiwarp/geometry.hpp"
#include "rectiwarp/grid_io.hpp"
#include "rectiwarp/image_io.hpp"
#include "rectiwarp/level_set.hpp"
#include "rectiwarp/losses.hpp"
#include "rectiwarp/metrics.hpp"
#include "rectiwarp/rng.hpp"
#include "rectiwarp/smoe.hpp"
#include "rectiwarp/tps.hpp"
#include "rectiwarp/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ------------------------------------------------------------------ helpers

// All file outputs go through a temp-then-rename step so that a failure
// never leaves a half-written artifact behind.
template <typename Writer>
void atomic_write(const std::string &path, Writer &&writer) {
    // The temp name keeps the final extension so format dispatch still works.
    fs::path p(path);
    fs::path tmp = p.parent_path() / (p.stem().string() + ".tmp" + p.extension().string());
    writer(tmp.string());
    fs::rename(tmp, p);
}

json read_json_file(const std::string &path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    json j;
    try {
        is >> j;
    } catch (const json::parse_error &e) {
        throw std::runtime_error("invalid JSON in '" + path + "': " + e.what());
    }
    return j;
}

void write_json_file(const json &j, const std::string &path) {
    atomic_write(path, [&](const std::string &tmp) {
        std::ofstream os(tmp);
        if (!os) {
            throw std::runtime_error("cannot open '" + tmp + "'");
        }
        os << j.dump(2) << "\n";
        if (!os.flush()) {
            throw std::runtime_error("write failed for '" + tmp + "'");
        }
    });
}

// foo/bar.png + "_mask" -> foo/bar_mask.png
std::string with_stem_suffix(const std::string &path, const std::string &suffix) {
    fs::path p(path);
    fs::path out = p.parent_path() / (p.stem().string() + suffix + p.extension().string());
    return out.string();
}

std::string replace_extension(const std::string &path, const std::string &ext) {
    fs::path p(path);
    p.replace_extension(ext);
    return p.string();
}

// ---------------------------------------------------------------- warp core

struct DistortOutput {
    rectiwarp::Image image;
    rectiwarp::Mask validity;
    rectiwarp::FlowField warp_flow; // destination -> source, pixels
};

// Synthesizes the distorted view of a clean image: each output pixel is
// backward-sampled from the clean image at its undistorted location.
DistortOutput apply_distortion(const rectiwarp::Image &clean,
                               const rectiwarp::DistortionParams &params) {
    const int W = clean.width;
    const int H = clean.height;
    const rectiwarp::PixelFrame frame = rectiwarp::PixelFrame::standard(W, H);
    rectiwarp::SamplingGrid grid(W, H);
    rectiwarp::FlowField flow(W, H);
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            const rectiwarp::Point2 p = frame.to_normalized(u, v);
            try {
                const rectiwarp::Point2 src = rectiwarp::undistort_point(p, params);
                const rectiwarp::Point2 spx = frame.to_pixel(src);
                grid.at(u, v) = {rectiwarp::pixel_to_norm(spx.x, W),
                                 rectiwarp::pixel_to_norm(spx.y, H)};
                flow.at(u, v) = {spx.x - u, spx.y - v};
            } catch (const rectiwarp::NoConvergenceError &) {
                // The distortion never covers this pixel's radius: it is
                // simply outside the field of view, so mark it invalid.
                grid.at(u, v) = {-2.0, -2.0};
                flow.at(u, v) = {0.0, 0.0};
            }
        }
    }
    rectiwarp::SampleResult s = rectiwarp::bilinear_sample(clean, grid);
    return {std::move(s.image), std::move(s.mask), std::move(flow)};
}

void write_image_atomic(const rectiwarp::Image &img, const std::string &path,
                        int bits) {
    atomic_write(path,
                 [&](const std::string &tmp) { rectiwarp::write_image(img, tmp, bits); });
}

void write_mask_atomic(const rectiwarp::Mask &mask, const std::string &path) {
    atomic_write(path,
                 [&](const std::string &tmp) { rectiwarp::write_mask(mask, tmp); });
}

void write_flow_atomic(const rectiwarp::FlowField &flow, const std::string &path) {
    atomic_write(path,
                 [&](const std::string &tmp) { rectiwarp::write_flow(flow, tmp); });
}

void write_control_grid_atomic(const rectiwarp::ControlGrid &grid,
                               const std::string &path) {
    atomic_write(path, [&](const std::string &tmp) {
        rectiwarp::write_control_grid(grid, tmp);
    });
}

json param_ranges_doc() {
    return json{
        {"t1", {{"theta_k1", {0.9, 1.1}}, {"theta_k2", {-0.05, 0.05}}}},
        {"t2", {{"radial_k1", {0.95, 1.1}}, {"radial_k2", {-0.1, 0.1}}}},
        {"t3",
         {{"radial_k1", {0.95, 1.1}},
          {"radial_k2", {-0.1, 0.1}},
          {"t0_x", {-0.1, 0.1}},
          {"t0_y", {-0.1, 0.1}}}},
        {"t4", {{"alpha_deg", {-10.0, 10.0}}}}};
}

// ----------------------------------------------------------------- commands

int cmd_distort(const std::string &in, const std::string &out,
                const std::string &params_path, const std::string &flow_out,
                std::string mask_out, int bits) {
    const json pj = read_json_file(params_path);
    const auto params = pj.get<rectiwarp::DistortionParams>();
    const rectiwarp::Image clean = rectiwarp::read_image(in);
    DistortOutput result = apply_distortion(clean, params);

    if (mask_out.empty()) mask_out = with_stem_suffix(out, "_mask");
    write_image_atomic(result.image, out, bits);
    write_mask_atomic(result.validity, mask_out);
    if (!flow_out.empty()) write_flow_atomic(result.warp_flow, flow_out);

    json manifest{{"command", "distort"},
                  {"version", rectiwarp::kVersion},
                  {"in", in},
                  {"out", out},
                  {"mask_out", mask_out},
                  {"flow_out", flow_out},
                  {"bits", bits},
                  {"params", pj}};
    write_json_file(manifest, out + ".manifest.json");
    return 0;
}

int cmd_synth(const std::string &clean_dir, const std::string &out_dir,
              const std::string &task_str, int n, std::uint64_t seed, int bits) {
    const rectiwarp::Task task = rectiwarp::task_from_string(task_str);
    if (n < 0) {
        throw std::invalid_argument("synth: n must be >= 0");
    }

    std::vector<std::string> clean_files;
    if (fs::exists(clean_dir)) {
        for (const auto &entry : fs::directory_iterator(clean_dir)) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
                return static_cast<char>(std::tolower(c));
            });
            if (ext == ".png" || ext == ".pgm" || ext == ".ppm") {
                clean_files.push_back(entry.path().string());
            }
        }
    }
    std::sort(clean_files.begin(), clean_files.end());
    if (n > 0 && clean_files.empty()) {
        throw std::runtime_error("synth: no readable images in '" + clean_dir + "'");
    }

    fs::create_directories(out_dir);
    rectiwarp::Rng rng(seed);
    json items = json::array();
    for (int i = 0; i < n; ++i) {
        const std::string &clean_path = clean_files[static_cast<std::size_t>(i) %
                                                    clean_files.size()];
        const rectiwarp::Image clean = rectiwarp::read_image(clean_path);
        const rectiwarp::DistortionParams params =
            rectiwarp::sample_task_params(task, rng);
        DistortOutput result = apply_distortion(clean, params);
        const rectiwarp::Mask prompt =
            rectiwarp::prompt_from_validity(result.validity, task);
        const rectiwarp::FlowField gt_flow =
            rectiwarp::distortion_flow(params, clean.width, clean.height);

        std::ostringstream stem;
        stem << std::setw(4) << std::setfill('0') << i;
        const std::string distorted_path =
            (fs::path(out_dir) / (stem.str() + "_distorted.png")).string();
        const std::string prompt_path =
            (fs::path(out_dir) / (stem.str() + "_prompt.png")).string();
        const std::string flow_path =
            (fs::path(out_dir) / (stem.str() + "_flow.flo")).string();

        write_image_atomic(result.image, distorted_path, bits);
        write_mask_atomic(prompt, prompt_path);
        write_flow_atomic(gt_flow, flow_path);

        json params_json;
        to_json(params_json, params);
        items.push_back(json{{"index", i},
                             {"clean", clean_path},
                             {"params", params_json},
                             {"distorted", distorted_path},
                             {"prompt", prompt_path},
                             {"flow", flow_path}});
    }

    json manifest{{"command", "synth"},
                  {"version", rectiwarp::kVersion},
                  {"clean_dir", clean_dir},
                  {"out_dir", out_dir},
                  {"task", task_str},
                  {"n", n},
                  {"seed", seed},
                  {"bits", bits},
                  {"param_ranges", param_ranges_doc()},
                  {"items", items}};
    write_json_file(manifest, (fs::path(out_dir) / "manifest.json").string());
    return 0;
}

int cmd_rectify(const std::string &in, const std::string &mask_path,
                const std::string &out, const std::string &ref_path,
                const std::string &flow_path, const std::string &config_path,
                std::string mask_out, int bits) {
    const rectiwarp::Image x0 = rectiwarp::read_image(in);
    const rectiwarp::Mask m0 = rectiwarp::read_mask(mask_path);
    if (m0.width != x0.width || m0.height != x0.height) {
        throw std::invalid_argument("rectify: image and mask dimensions differ");
    }

    const json cj = read_json_file(config_path);
    const auto cfg = cj.get<rectiwarp::FitConfig>();

    std::optional<rectiwarp::Image> ref;
    if (!ref_path.empty()) {
        ref = rectiwarp::read_image(ref_path);
        if (!ref->same_shape(x0)) {
            throw std::invalid_argument("rectify: reference dimensions differ");
        }
    }

    std::unique_ptr<rectiwarp::LevelSet> ls;
    if (m0.all_zeros()) {
        throw std::invalid_argument("rectify: mask marks no valid content");
    }
    if (!m0.all_ones()) {
        ls = std::make_unique<rectiwarp::LevelSet>(m0);
    }

    std::optional<rectiwarp::ControlGrid> warm;
    if (!flow_path.empty()) {
        const rectiwarp::FlowField flow = rectiwarp::read_flow(flow_path);
        if (flow.width != x0.width || flow.height != x0.height) {
            throw std::invalid_argument("rectify: flow dimensions differ");
        }
        warm = rectiwarp::fit_from_flow(flow, cfg.grid_cols, cfg.grid_rows, cfg.lambda);
    }

    const rectiwarp::LossWeights weights;
    const rectiwarp::FitResult fit = rectiwarp::fit_rectification(
        x0, m0, ref ? &*ref : nullptr, ls.get(), weights, cfg,
        warm ? &*warm : nullptr);

    const rectiwarp::ControlGrid c0 =
        rectiwarp::ControlGrid::basic(cfg.grid_cols, cfg.grid_rows);
    std::vector<rectiwarp::Point2> d1(c0.points.size()), d2(c0.points.size());
    for (std::size_t i = 0; i < c0.points.size(); ++i) {
        d1[i] = fit.c1.points[i] - c0.points[i];
        d2[i] = fit.c2.points[i] - fit.c1.points[i];
    }
    const rectiwarp::RpTpsResult warped =
        rectiwarp::rp_tps_apply(x0, m0, c0, d1, d2, cfg.lambda);

    if (mask_out.empty()) mask_out = with_stem_suffix(out, "_mask");
    const std::string c1_path = replace_extension(with_stem_suffix(out, "_c1"), ".tpsg");
    const std::string c2_path = replace_extension(with_stem_suffix(out, "_c2"), ".tpsg");
    const std::string report_path = out + ".report.json";

    write_image_atomic(warped.xd, out, bits);
    write_mask_atomic(warped.md, mask_out);
    write_control_grid_atomic(fit.c1, c1_path);
    write_control_grid_atomic(fit.c2, c2_path);
    json fit_json;
    to_json(fit_json, fit);
    write_json_file(fit_json, report_path);

    json manifest{{"command", "rectify"},
                  {"version", rectiwarp::kVersion},
                  {"in", in},
                  {"mask", mask_path},
                  {"out", out},
                  {"ref", ref_path},
                  {"flow", flow_path},
                  {"mask_out", mask_out},
                  {"c1", c1_path},
                  {"c2", c2_path},
                  {"report", report_path},
                  {"bits", bits},
                  {"config", cj}};
    write_json_file(manifest, out + ".manifest.json");
    return 0;
}

int cmd_eval(const std::string &result_path, const std::string &reference_path,
             const std::string &mask_path) {
    const rectiwarp::Image result = rectiwarp::read_image(result_path);
    const rectiwarp::Image reference = rectiwarp::read_image(reference_path);
    double p, s;
    if (!mask_path.empty()) {
        const rectiwarp::Mask mask = rectiwarp::read_mask(mask_path);
        p = rectiwarp::psnr(result, reference, mask);
        s = rectiwarp::ssim(result, reference, mask);
    } else {
        p = rectiwarp::psnr(result, reference);
        s = rectiwarp::ssim(result, reference);
    }
    std::cout << json{{"psnr", p}, {"ssim", s}}.dump(2) << "\n";
    return 0;
}

// Demo scoring heuristic for the router: five cheap image statistics.
// The gating combinator itself is score-agnostic.
std::vector<double> heuristic_scores(const rectiwarp::Image &img) {
    double mean = 0.0;
    for (double v : img.data) mean += v;
    mean /= static_cast<double>(img.data.size());

    double var = 0.0;
    for (double v : img.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(img.data.size());

    double grad = 0.0;
    std::size_t terms = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x + 1 < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                grad += std::abs(img.at(x + 1, y, c) - img.at(x, y, c));
                ++terms;
            }
        }
    }
    grad = terms ? grad / static_cast<double>(terms) : 0.0;

    std::size_t dark_border = 0, border = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (y != 0 && y != img.height - 1 && x != 0 && x != img.width - 1) continue;
            ++border;
            if (img.at(x, y, 0) < 0.05) ++dark_border;
        }
    }
    const double dark = border ? static_cast<double>(dark_border) / border : 0.0;

    return {mean, std::sqrt(var), grad, dark, 0.5};
}

int cmd_route(const std::string &in, const std::string &scores_path, int k) {
    std::vector<double> scores;
    if (!scores_path.empty()) {
        scores = read_json_file(scores_path).get<std::vector<double>>();
    } else if (!in.empty()) {
        scores = heuristic_scores(rectiwarp::read_image(in));
    } else {
        throw std::invalid_argument("route: need --scores or --in");
    }
    const rectiwarp::GateWeights gates = rectiwarp::topk_softmax(scores, k);
    json gates_json;
    to_json(gates_json, gates);
    gates_json["selected"] = gates.argmax();
    std::cout << gates_json.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Distortion synthesis and rectification toolkit"};
    app.set_version_flag("--version", rectiwarp::kVersion);
    app.require_subcommand(1);

    // distort
    std::string d_in, d_out, d_params, d_flow_out, d_mask_out;
    int d_bits = 8;
    CLI::App *distort = app.add_subcommand("distort", "Warp an image by a distortion model");
    distort->add_option("--in", d_in, "Input image")->required();
    distort->add_option("--out", d_out, "Output (distorted) image")->required();
    distort->add_option("--params", d_params, "Distortion parameter JSON file")->required();
    distort->add_option("--flow-out", d_flow_out, "Optional output flow (.flo)");
    distort->add_option("--mask-out", d_mask_out, "Validity mask output (default: <out>_mask)");
    distort->add_option("--bits", d_bits, "Output bit depth (8 or 16)")
        ->check(CLI::IsMember({8, 16}));

    // synth
    std::string s_clean, s_out, s_task;
    int s_n = 0, s_bits = 8;
    std::uint64_t s_seed = 0;
    CLI::App *synth = app.add_subcommand("synth", "Generate distorted/prompt/flow triplets");
    synth->add_option("--clean-dir", s_clean, "Directory of clean images")->required();
    synth->add_option("--out-dir", s_out, "Output directory")->required();
    synth->add_option("--task", s_task, "Task: t1, t2, t3 or t4")->required();
    synth->add_option("--n", s_n, "Number of triplets")->required();
    synth->add_option("--seed", s_seed, "Random seed")->required();
    synth->add_option("--bits", s_bits, "Output bit depth (8 or 16)")
        ->check(CLI::IsMember({8, 16}));

    // rectify
    std::string r_in, r_mask, r_out, r_ref, r_flow, r_config, r_mask_out;
    int r_bits = 8;
    CLI::App *rectify = app.add_subcommand("rectify", "Fit and apply a rectifying warp");
    rectify->add_option("--in", r_in, "Input (distorted) image")->required();
    rectify->add_option("--mask", r_mask, "Validity/prompt mask")->required();
    rectify->add_option("--out", r_out, "Output (rectified) image")->required();
    rectify->add_option("--ref", r_ref, "Optional reference image");
    rectify->add_option("--flow", r_flow, "Optional backward flow warm start (.flo)");
    rectify->add_option("--config", r_config, "Fit configuration JSON file")->required();
    rectify->add_option("--mask-out", r_mask_out, "Mask output (default: <out>_mask)");
    rectify->add_option("--bits", r_bits, "Output bit depth (8 or 16)")
        ->check(CLI::IsMember({8, 16}));

    // eval
    std::string e_result, e_reference, e_mask;
    CLI::App *eval_cmd = app.add_subcommand("eval", "Print PSNR/SSIM of a result vs a reference");
    eval_cmd->add_option("--result", e_result, "Result image")->required();
    eval_cmd->add_option("--reference", e_reference, "Reference image")->required();
    eval_cmd->add_option("--mask", e_mask, "Optional validity mask");

    // route
    std::string o_in, o_scores;
    int o_k = 1;
    CLI::App *route = app.add_subcommand("route", "Top-k softmax gating demo");
    route->add_option("--in", o_in, "Image for the heuristic scorer");
    route->add_option("--scores", o_scores, "JSON file with an array of expert scores");
    route->add_option("--k", o_k, "Number of experts to keep");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*distort) return cmd_distort(d_in, d_out, d_params, d_flow_out, d_mask_out, d_bits);
        if (*synth) return cmd_synth(s_clean, s_out, s_task, s_n, s_seed, s_bits);
        if (*rectify)
            return cmd_rectify(r_in, r_mask, r_out, r_ref, r_flow, r_config, r_mask_out, r_bits);
        if (*eval_cmd) return cmd_eval(e_result, e_reference, e_mask);
        if (*route) return cmd_route(o_in, o_scores, o_k);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
