// corrtps_main.cpp - command-line front end for the registration toolkit.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "corrtps/correspond.hpp"
#include "corrtps/mesh.hpp"
#include "corrtps/metaimage.hpp"
#include "corrtps/metrics.hpp"
#include "corrtps/phantom.hpp"
#include "corrtps/pipeline.hpp"
#include "corrtps/resample.hpp"
#include "corrtps/segment.hpp"
#include "corrtps/tps.hpp"

namespace fs = std::filesystem;
using namespace corrtps;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

PipelineConfig load_with_overrides(const std::string& config_path,
                                   const std::vector<std::string>& overrides) {
    PipelineConfig config = load_config(config_path);
    for (const auto& o : overrides) apply_override(config, o);
    return config;
}

void print_timing_table(const fs::path& dir) {
    using nlohmann::json;
    std::printf("%-18s %8s\n", "stage", "time (s)");
    for (const char* name : {"timing_init.json", "timing_register.json"}) {
        const fs::path p = dir / name;
        if (!fs::exists(p)) continue;
        std::ifstream in(p);
        json j;
        in >> j;
        std::printf("-- %s\n", name);
        for (const char* key :
             {"rigid_prealign_s", "mesh_generation_s", "correspondence_s", "tps_fit_s",
              "resampling_s", "refinement_s", "total_s"}) {
            if (j.contains(key)) std::printf("%-18s %8.1f\n", key, j[key].get<double>());
        }
    }
    const fs::path metrics = dir / "metrics.csv";
    if (fs::exists(metrics)) {
        std::printf("-- metrics.csv\n");
        std::ifstream in(metrics);
        std::string line;
        while (std::getline(in, line)) std::printf("%s\n", line.c_str());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"corrtps - correspondence-driven TPS initialisation for CT registration"};
    app.require_subcommand(1);

    // segment
    auto* seg = app.add_subcommand("segment", "extract bone and body-envelope masks");
    std::string seg_volume, seg_out = ".";
    double seg_crop_inferior = -1e30;
    seg->add_option("--volume", seg_volume, "HU MetaImage volume")->required();
    seg->add_option("--output-dir", seg_out, "output directory");
    seg->add_option("--crop-inferior", seg_crop_inferior, "bone z-plane crop (mm)");

    // mesh
    auto* msh = app.add_subcommand("mesh", "mask -> conditioned surface mesh (PLY)");
    std::string mesh_mask, mesh_out;
    double mesh_lambda = 0.5, mesh_mu = -0.53;
    int mesh_iters = 10;
    std::size_t mesh_faces = 3000;
    msh->add_option("--mask", mesh_mask, "MET_UCHAR mask")->required();
    msh->add_option("--out", mesh_out, "output PLY path")->required();
    msh->add_option("--taubin-lambda", mesh_lambda);
    msh->add_option("--taubin-mu", mesh_mu);
    msh->add_option("--taubin-iterations", mesh_iters);
    msh->add_option("--target-faces", mesh_faces, "decimation target (0 = keep all)");

    // correspond
    auto* cor = app.add_subcommand("correspond", "estimate surface correspondences");
    std::string cor_src, cor_tgt, cor_out;
    double cor_null = 20.0;
    cor->add_option("--source-mesh", cor_src, "moving-patient mesh (PLY)")->required();
    cor->add_option("--target-mesh", cor_tgt, "fixed-patient mesh (PLY)")->required();
    cor->add_option("--out", cor_out, "output CSV")->required();
    cor->add_option("--null-threshold", cor_null, "null distance threshold (mm)");

    // tps-fit
    auto* fit = app.add_subcommand("tps-fit", "fit a TPS to correspondence CSVs");
    std::vector<std::string> fit_csv;
    std::string fit_model, fit_field_geom, fit_field_out;
    double fit_lambda = 0.0, fit_dedup = 0.5, fit_min_sep = 2.0;
    std::size_t fit_max_controls = 0;
    int fit_stride = 4;
    fit->add_option("--correspondences", fit_csv, "correspondence CSV(s)")->required();
    fit->add_option("--out", fit_model, "output model file")->required();
    fit->add_option("--lambda", fit_lambda, "regularisation lambda_tps (mm)");
    fit->add_option("--dedup-tolerance", fit_dedup, "source dedup radius (mm)");
    fit->add_option("--max-controls", fit_max_controls, "subsample cap (0 = keep all)");
    fit->add_option("--min-separation", fit_min_sep, "subsampling separation (mm)");
    fit->add_option("--field-geometry", fit_field_geom,
                    "MetaImage whose grid receives the displacement field");
    fit->add_option("--field-out", fit_field_out, "output field path (.mhd)");
    fit->add_option("--stride", fit_stride, "coarse evaluation stride");

    // warp
    auto* wrp = app.add_subcommand("warp", "pull an image or mask through a field");
    std::string warp_field, warp_input, warp_out;
    bool warp_nearest = false;
    wrp->add_option("--field", warp_field, "displacement field (.mhd)")->required();
    wrp->add_option("--input", warp_input, "volume or mask to warp")->required();
    wrp->add_option("--out", warp_out, "output path")->required();
    wrp->add_flag("--nearest", warp_nearest, "nearest-neighbour sampling (forced for masks)");

    // init / register
    std::string cfg_path;
    std::vector<std::string> overrides;
    auto* ini = app.add_subcommand("init", "run the CorrTPS initialisation pipeline");
    ini->add_option("--config", cfg_path, "pipeline config file")->required();
    ini->add_option("--set", overrides, "override config entries (key=value)");
    auto* reg = app.add_subcommand("register", "initialisation + refinement + metrics");
    reg->add_option("--config", cfg_path, "pipeline config file")->required();
    reg->add_option("--set", overrides, "override config entries (key=value)");

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "paired Wilcoxon tests on metrics CSVs");
    std::string eva_results, eva_baseline, eva_pipeline = "init", eva_base_pipeline,
                eva_metric = "mdta_mm", eva_out;
    double eva_alpha = 0.05;
    eva->add_option("--results", eva_results, "results directory")->required();
    eva->add_option("--baseline", eva_baseline, "baseline directory")->required();
    eva->add_option("--pipeline", eva_pipeline, "pipeline rows on the results side");
    eva->add_option("--baseline-pipeline", eva_base_pipeline,
                    "pipeline rows on the baseline side (default: same)");
    eva->add_option("--metric", eva_metric, "metric column");
    eva->add_option("--alpha", eva_alpha, "uncorrected significance level");
    eva->add_option("--out", eva_out, "write the JSON report here");

    // report
    auto* rep = app.add_subcommand("report", "print timing and metrics of a pipeline run");
    std::string rep_dir;
    rep->add_option("--dir", rep_dir, "pipeline output directory")->required();

    // phantom
    auto* pha = app.add_subcommand("phantom", "generate a synthetic test pair + config");
    std::string pha_out;
    std::uint64_t pha_seed = 1;
    std::vector<int> pha_dims{96, 128, 160};
    double pha_spacing = 1.0, pha_maxdisp = 12.0;
    bool pha_self = false;
    pha->add_option("--out", pha_out, "output directory")->required();
    pha->add_option("--seed", pha_seed);
    pha->add_option("--dims", pha_dims, "grid size, 3 values")->expected(3);
    pha->add_option("--spacing", pha_spacing, "isotropic voxel spacing (mm)");
    pha->add_option("--max-displacement", pha_maxdisp, "truth deformation cap (mm)");
    pha->add_flag("--self", pha_self, "moving == fixed (no deformation)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*seg) {
            const Volume vol = read_metaimage(seg_volume);
            fs::create_directories(seg_out);
            const Mask envelope = extract_body_envelope(vol);
            const Mask bone = extract_bone(vol, envelope, seg_crop_inferior);
            write_mask(envelope, fs::path(seg_out) / "envelope.mhd");
            write_mask(bone, fs::path(seg_out) / "bone.mhd");
        } else if (*msh) {
            Mask mask = read_mask(mesh_mask);
            if (mask_touches_border(mask)) mask = pad_mask(mask, 1);
            TriMesh mesh = marching_cubes(mask);
            if (mesh_iters > 0) mesh = taubin_smooth(mesh, mesh_lambda, mesh_mu, mesh_iters);
            mesh = remove_duplicates_and_degenerate(mesh);
            if (mesh_faces >= 4 && mesh.faces.size() > mesh_faces)
                mesh = decimate(mesh, mesh_faces);
            write_ply(mesh, mesh_out);
        } else if (*cor) {
            const TriMesh source = read_ply(cor_src);
            const TriMesh target = read_ply(cor_tgt);
            const CorrespondenceSet set = baseline_match(source, target, cor_null);
            write_correspondences_csv({set}, cor_out);
        } else if (*fit) {
            std::vector<CorrespondenceSet> sets;
            for (const auto& path : fit_csv) {
                auto more = read_correspondences_csv(path);
                sets.insert(sets.end(), more.begin(), more.end());
            }
            ControlPointSet cps = gather_control_points(sets, fit_dedup);
            if (fit_max_controls > 0 && cps.size() > fit_max_controls)
                cps = subsample_controls(cps, fit_max_controls, fit_min_sep);
            const TpsModel model = tps_fit(cps, fit_lambda);
            write_tps_model(model, fit_model);
            if (!fit_field_out.empty()) {
                if (fit_field_geom.empty())
                    throw ConfigError("tps-fit: --field-out requires --field-geometry");
                const Volume ref = read_metaimage(fit_field_geom);
                write_field(tps_field_on_grid(model, ref.geometry, fit_stride), fit_field_out);
            }
        } else if (*wrp) {
            const DisplacementField field = read_field(warp_field);
            bool is_mask = false;
            try {
                const Mask m = read_mask(warp_input);
                is_mask = true;
                write_mask(warp_mask(field, m), warp_out);
            } catch (const UnsupportedFormatError&) {
            }
            if (!is_mask) {
                if (warp_nearest)
                    throw ConfigError("warp: --nearest is only supported for mask inputs");
                write_metaimage(warp_volume(field, read_metaimage(warp_input)), warp_out);
            }
        } else if (*ini) {
            const PipelineConfig config = load_with_overrides(cfg_path, overrides);
            const InitArtifacts artifacts = run_initialise(config);
            std::printf("init complete: %zu control points, field on %s grid\n",
                        artifacts.control_point_count,
                        artifacts.field.geometry.describe().c_str());
            std::printf("%s\n", artifacts.timing.to_json().c_str());
        } else if (*reg) {
            const PipelineConfig config = load_with_overrides(cfg_path, overrides);
            const RegisterArtifacts artifacts = run_register(config);
            std::printf("register complete\n%s\n", artifacts.init.timing.to_json().c_str());
        } else if (*eva) {
            const EvaluationReport report =
                run_evaluate(eva_results, eva_baseline, eva_pipeline, eva_base_pipeline,
                             eva_metric, eva_alpha);
            const std::string j = report.to_json();
            if (!eva_out.empty()) {
                std::ofstream out(eva_out);
                out << j << "\n";
            }
            std::printf("%s\n", j.c_str());
        } else if (*rep) {
            print_timing_table(rep_dir);
        } else if (*pha) {
            PhantomArgs args;
            args.dims = {pha_dims[0], pha_dims[1], pha_dims[2]};
            args.spacing = {pha_spacing, pha_spacing, pha_spacing};
            args.seed = pha_seed;
            args.deform = !pha_self;
            args.max_displacement = pha_maxdisp;
            const PhantomPair pair = make_phantom_pair(args);
            const fs::path config = write_phantom_pair(pair, pha_out);
            std::printf("phantom written; config at %s\n", config.string().c_str());
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const StageError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitStage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitStage;
    }
    return 0;
}
