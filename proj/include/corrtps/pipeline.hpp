// pipeline.hpp - configuration, timing and end-to-end orchestration.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "corrtps/correspond.hpp"
#include "corrtps/field.hpp"
#include "corrtps/metrics.hpp"
#include "corrtps/segment.hpp"
#include "corrtps/volume.hpp"

namespace corrtps {

struct StructureConfig {
    std::string name;
    std::filesystem::path fixed_mask;
    std::filesystem::path moving_mask;
    bool in_corrtps = true;
};

struct PipelineConfig {
    std::filesystem::path fixed_volume;
    std::filesystem::path moving_volume;
    std::filesystem::path output_dir = "out";
    std::vector<StructureConfig> structures;

    double bone_hu = 400.0;
    double envelope_hu = -200.0;
    double bone_crop_inferior = -1e30;  // mm z-plane; default keeps everything

    bool crop_enabled = true;
    Index3 crop_dims{128, 288, 480};
    double window_width = 1600.0;
    double window_level = 0.0;

    double taubin_lambda = 0.5;
    double taubin_mu = -0.53;
    int taubin_iterations = 10;
    std::size_t decimation_target_faces = 3000;

    double null_threshold = 20.0;          // mm
    double lambda_tps = 0.0;               // mm
    int coarse_stride = 4;
    std::size_t max_control_points = 2000;  // 0 disables subsampling
    double min_control_separation = 2.0;    // mm

    bool refine_enabled = true;
    double refine_lattice_spacing = 20.0;  // mm
    double refine_bending_weight = 0.001;
    int refine_max_iters = 30;
    std::filesystem::path external_field;  // replaces the refine stage if set

    void validate() const;
};

// TOML-like key = value file; relative paths resolve against the file's dir.
PipelineConfig load_config(const std::filesystem::path& path);

// "key=value" strings applied over a loaded config (CLI --set flags).
void apply_override(PipelineConfig& config, const std::string& assignment);

struct TimingReport {
    double rigid_prealign = 0.0;  // seconds
    double mesh_generation = 0.0;
    double correspondence = 0.0;
    double tps_fit = 0.0;
    double resampling = 0.0;
    double refinement = 0.0;
    double total() const {
        return rigid_prealign + mesh_generation + correspondence + tps_fit + resampling +
               refinement;
    }
    std::string to_json() const;  // seconds at 0.1 s precision
};

struct InitArtifacts {
    DisplacementField field;                 // moving grid -> fixed offsets
    Volume warped_fixed;                     // HU, on the moving grid
    Volume moving_processed;                 // HU, cropped moving volume
    std::map<std::string, Mask> fixed_masks;   // cropped fixed-patient masks
    std::map<std::string, Mask> warped_fixed_masks;
    std::map<std::string, Mask> moving_masks;  // references for evaluation
    SimilarityTransform rigid;               // global moving -> fixed prealign
    std::size_t control_point_count = 0;
    TimingReport timing;
};

struct RegisterArtifacts {
    InitArtifacts init;
    DisplacementField total_field;
    Volume final_warped;
    std::vector<StructureDistanceResult> metrics_rigid;
    std::vector<StructureDistanceResult> metrics_init;
    std::vector<StructureDistanceResult> metrics_refined;  // empty if no refine
};

// Full initialisation: preprocess, segment, mesh, correspond, fit, resample.
// Persists every intermediate under config.output_dir.
InitArtifacts run_initialise(const PipelineConfig& config);

// run_initialise + refinement (internal B-spline or external field file),
// then per-structure metrics for rigid-only / init / init+refine.
RegisterArtifacts run_register(const PipelineConfig& config);

struct EvaluationRow {
    std::string structure;
    double mean_results = 0.0;
    double mean_baseline = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    bool degenerate = false;  // all paired differences zero
    bool significant = false;
};

struct EvaluationReport {
    std::vector<EvaluationRow> rows;
    double threshold = 0.05;  // Bonferroni-corrected
    int n_pairs = 0;
    std::string to_json() const;
};

// Paired Wilcoxon per structure on per-pair metrics CSVs (matched filenames
// across the two directories); `pipeline` selects the CSV rows on the results
// side, `baseline_pipeline` on the baseline side (empty = same), `metric` is
// the column (mdta_mm by default).
EvaluationReport run_evaluate(const std::filesystem::path& results_dir,
                              const std::filesystem::path& baseline_dir,
                              const std::string& pipeline = "init",
                              const std::string& baseline_pipeline = "",
                              const std::string& metric = "mdta_mm", double alpha = 0.05);

void write_metrics_csv(const std::vector<StructureDistanceResult>& rigid,
                       const std::vector<StructureDistanceResult>& init,
                       const std::vector<StructureDistanceResult>& refined,
                       const std::filesystem::path& path);

} // namespace corrtps
