// pipeline.cpp
#include "corrtps/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "corrtps/mesh.hpp"
#include "corrtps/metaimage.hpp"
#include "corrtps/refine.hpp"
#include "corrtps/resample.hpp"
#include "corrtps/tps.hpp"

namespace corrtps {

namespace {

using json = nlohmann::json;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: " + key + " must be true or false, got '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " must be a number, got '" + v + "'");
    }
}

int parse_int(const std::string& v, const std::string& key) {
    const double d = parse_double(v, key);
    if (d != std::floor(d)) throw ConfigError("config: " + key + " must be an integer");
    return static_cast<int>(d);
}

Index3 parse_dims(const std::string& v, const std::string& key) {
    Index3 out{};
    std::istringstream ss(v);
    std::string field;
    for (int a = 0; a < 3; ++a) {
        if (!std::getline(ss, field, ','))
            throw ConfigError("config: " + key + " needs three comma-separated values");
        out[a] = parse_int(trim(field), key);
    }
    return out;
}

StructureConfig& structure_entry(PipelineConfig& config, const std::string& name) {
    for (auto& s : config.structures)
        if (s.name == name) return s;
    config.structures.push_back(StructureConfig{name, {}, {}, true});
    return config.structures.back();
}

// One key=value assignment; `base` resolves relative paths (empty = leave as-is).
void assign(PipelineConfig& config, const std::string& key, const std::string& value,
            const std::filesystem::path& base) {
    auto path_of = [&](const std::string& v) -> std::filesystem::path {
        std::filesystem::path p = v;
        if (!base.empty() && p.is_relative()) p = base / p;
        return p;
    };
    if (key == "fixed_volume") config.fixed_volume = path_of(value);
    else if (key == "moving_volume") config.moving_volume = path_of(value);
    else if (key == "output_dir") config.output_dir = path_of(value);
    else if (key == "structures") {
        std::istringstream ss(value);
        std::string name;
        while (std::getline(ss, name, ','))
            if (!trim(name).empty()) structure_entry(config, trim(name));
    } else if (key.rfind("structure.", 0) == 0) {
        const auto rest = key.substr(10);
        const auto dot = rest.find('.');
        if (dot == std::string::npos)
            throw ConfigError("config: malformed structure key '" + key + "'");
        const std::string name = rest.substr(0, dot);
        const std::string field = rest.substr(dot + 1);
        StructureConfig& s = structure_entry(config, name);
        if (field == "fixed_mask") s.fixed_mask = path_of(value);
        else if (field == "moving_mask") s.moving_mask = path_of(value);
        else if (field == "in_corrtps") s.in_corrtps = parse_bool(value, key);
        else throw ConfigError("config: unknown structure field '" + field + "'");
    }
    else if (key == "bone_hu") config.bone_hu = parse_double(value, key);
    else if (key == "envelope_hu") config.envelope_hu = parse_double(value, key);
    else if (key == "bone_crop_inferior_mm") config.bone_crop_inferior = parse_double(value, key);
    else if (key == "crop_enabled") config.crop_enabled = parse_bool(value, key);
    else if (key == "crop_dims") config.crop_dims = parse_dims(value, key);
    else if (key == "window_width") config.window_width = parse_double(value, key);
    else if (key == "window_level") config.window_level = parse_double(value, key);
    else if (key == "taubin_lambda") config.taubin_lambda = parse_double(value, key);
    else if (key == "taubin_mu") config.taubin_mu = parse_double(value, key);
    else if (key == "taubin_iterations") config.taubin_iterations = parse_int(value, key);
    else if (key == "decimation_target_faces")
        config.decimation_target_faces = static_cast<std::size_t>(parse_int(value, key));
    else if (key == "null_threshold_mm") config.null_threshold = parse_double(value, key);
    else if (key == "lambda_tps") config.lambda_tps = parse_double(value, key);
    else if (key == "coarse_stride") config.coarse_stride = parse_int(value, key);
    else if (key == "max_control_points")
        config.max_control_points = static_cast<std::size_t>(parse_int(value, key));
    else if (key == "min_control_separation_mm")
        config.min_control_separation = parse_double(value, key);
    else if (key == "refine_enabled") config.refine_enabled = parse_bool(value, key);
    else if (key == "refine_lattice_spacing_mm")
        config.refine_lattice_spacing = parse_double(value, key);
    else if (key == "refine_bending_weight")
        config.refine_bending_weight = parse_double(value, key);
    else if (key == "refine_max_iters") config.refine_max_iters = parse_int(value, key);
    else if (key == "external_field") {
        if (!trim(value).empty()) config.external_field = path_of(value);
    }
    else throw ConfigError("config: unknown key '" + key + "'");
}

} // namespace

void PipelineConfig::validate() const {
    namespace fs = std::filesystem;
    auto must_exist = [](const fs::path& p, const std::string& what) {
        if (p.empty()) throw ConfigError("config: " + what + " is not set");
        if (!fs::exists(p)) throw ConfigError("config: " + what + " not found: " + p.string());
    };
    must_exist(fixed_volume, "fixed_volume");
    must_exist(moving_volume, "moving_volume");
    for (const auto& s : structures) {
        must_exist(s.fixed_mask, "structure." + s.name + ".fixed_mask");
        must_exist(s.moving_mask, "structure." + s.name + ".moving_mask");
    }
    if (!external_field.empty()) must_exist(external_field, "external_field");
    if (!(window_width > 0)) throw ConfigError("config: window_width must be > 0");
    for (const int d : crop_dims)
        if (d < 1) throw ConfigError("config: crop_dims must be positive");
    if (coarse_stride < 1) throw ConfigError("config: coarse_stride must be >= 1");
    if (lambda_tps < 0) throw ConfigError("config: lambda_tps must be >= 0");
    if (null_threshold <= 0) throw ConfigError("config: null_threshold_mm must be > 0");
    if (taubin_iterations < 0) throw ConfigError("config: taubin_iterations must be >= 0");
    if (decimation_target_faces < 4)
        throw ConfigError("config: decimation_target_faces must be >= 4");
    if (refine_max_iters < 0) throw ConfigError("config: refine_max_iters must be >= 0");
    if (!(refine_lattice_spacing > 0))
        throw ConfigError("config: refine_lattice_spacing_mm must be > 0");
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    PipelineConfig config;
    const std::filesystem::path base = path.parent_path();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        assign(config, key, value, base);
    }
    return config;
}

void apply_override(PipelineConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must be key=value: " + assignment);
    assign(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), {});
}

std::string TimingReport::to_json() const {
    auto r = [](double v) { return std::round(v * 10.0) / 10.0; };
    json j;
    j["rigid_prealign_s"] = r(rigid_prealign);
    j["mesh_generation_s"] = r(mesh_generation);
    j["correspondence_s"] = r(correspondence);
    j["tps_fit_s"] = r(tps_fit);
    j["resampling_s"] = r(resampling);
    j["refinement_s"] = r(refinement);
    j["total_s"] = r(total());
    return j.dump(2);
}

namespace {

class StageClock {
public:
    void start() { t0_ = std::chrono::steady_clock::now(); }
    double stop() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

template <typename Fn>
auto stage(const std::string& name, double& slot, Fn&& fn) {
    StageClock clock;
    clock.start();
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            slot += clock.stop();
        } else {
            auto result = fn();
            slot += clock.stop();
            return result;
        }
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

struct PatientData {
    Volume hu;                         // cropped HU volume
    Mask envelope;
    Mask bone;
    std::map<std::string, Mask> organ_masks;
    std::map<std::string, TriMesh> meshes;  // bone, envelope and organs
};

// Load, crop (window centred on the body envelope centroid) and segment.
PatientData prepare_patient(const PipelineConfig& config, bool moving,
                            const std::filesystem::path& out_dir) {
    PatientData data;
    const auto volume_path = moving ? config.moving_volume : config.fixed_volume;
    Volume hu = read_metaimage(volume_path);
    if (hu.kind != IntensityKind::HU)
        throw ContractError("pipeline: input volumes must be HU-valued");

    if (config.crop_enabled) {
        const Vec3 center = mask_centroid(extract_body_envelope(hu));
        hu = crop_to_dims(hu, config.crop_dims, center);
        for (const auto& s : config.structures) {
            Mask m = read_mask(moving ? s.moving_mask : s.fixed_mask, s.name);
            if (!(m.geometry.dims == config.crop_dims))
                m = crop_mask(m, config.crop_dims, center);
            data.organ_masks[s.name] = std::move(m);
        }
    } else {
        for (const auto& s : config.structures)
            data.organ_masks[s.name] = read_mask(moving ? s.moving_mask : s.fixed_mask, s.name);
    }
    for (const auto& [name, m] : data.organ_masks)
        if (!(m.geometry == hu.geometry))
            throw ContractError("pipeline: mask geometry mismatch for structure " + name);

    data.envelope = extract_body_envelope(hu);
    data.bone = extract_bone(hu, data.envelope, config.bone_crop_inferior);
    data.hu = std::move(hu);

    const std::string prefix = moving ? "moving_" : "fixed_";
    write_metaimage(data.hu, out_dir / (prefix + "volume.mhd"));
    write_mask(data.envelope, out_dir / (prefix + "envelope.mhd"));
    write_mask(data.bone, out_dir / (prefix + "bone.mhd"));
    return data;
}

TriMesh condition_mesh(const PipelineConfig& config, const Mask& mask) {
    Mask padded = mask_touches_border(mask) ? pad_mask(mask, 1) : mask;
    TriMesh mesh = marching_cubes(padded);
    if (config.taubin_iterations > 0)
        mesh = taubin_smooth(mesh, config.taubin_lambda, config.taubin_mu,
                             config.taubin_iterations);
    mesh = remove_duplicates_and_degenerate(mesh);
    if (mesh.faces.size() > config.decimation_target_faces)
        mesh = decimate(mesh, config.decimation_target_faces);
    return mesh;
}

void mesh_patient(const PipelineConfig& config, PatientData& data,
                  const std::filesystem::path& mesh_dir, const std::string& prefix) {
    std::filesystem::create_directories(mesh_dir);
    auto add = [&](const Mask& mask) {
        if (mask.foreground_count() == 0)
            throw DegenerateInputError("pipeline: empty mask for structure " + mask.label);
        TriMesh mesh = condition_mesh(config, mask);
        write_ply(mesh, mesh_dir / (prefix + mask.label + ".ply"));
        data.meshes[mask.label] = std::move(mesh);
    };
    add(data.envelope);
    add(data.bone);
    for (const auto& [name, mask] : data.organ_masks) add(mask);
}

std::vector<Vec3> all_mesh_vertices(const PatientData& data) {
    std::vector<Vec3> pts;
    for (const auto& [name, mesh] : data.meshes)
        pts.insert(pts.end(), mesh.vertices.begin(), mesh.vertices.end());
    return pts;
}

DisplacementField rigid_as_field(const SimilarityTransform& t, const GridGeometry& geometry) {
    DisplacementField f;
    f.geometry = geometry;
    f.vectors.resize(static_cast<std::size_t>(geometry.voxel_count()));
    for (std::int64_t idx = 0; idx < geometry.voxel_count(); ++idx) {
        const Index3 c = geometry.delinearize(idx);
        const Vec3 x = geometry.index_to_point(c[0], c[1], c[2]);
        f.vectors[static_cast<std::size_t>(idx)] = t.apply(x) - x;
    }
    return f;
}

std::vector<StructureDistanceResult> structure_metrics(
    const std::map<std::string, Mask>& warped, const std::map<std::string, Mask>& reference) {
    std::vector<StructureDistanceResult> rows;
    for (const auto& [name, ref] : reference) {
        const auto it = warped.find(name);
        if (it == warped.end()) continue;
        StructureDistanceResult r;
        r.structure = name;
        if (it->second.foreground_count() == 0 || ref.foreground_count() == 0) {
            r.mdta = std::numeric_limits<double>::infinity();
            r.hausdorff = r.mdta;
            r.dice = 0.0;
        } else {
            const auto a = surface_points(it->second);
            const auto b = surface_points(ref);
            r.mdta = mdta(a, b);
            r.hausdorff = hausdorff(a, b);
            r.dice = dice(it->second, ref);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace

InitArtifacts run_initialise(const PipelineConfig& config) {
    config.validate();
    namespace fs = std::filesystem;
    const fs::path out = config.output_dir;
    fs::create_directories(out);

    InitArtifacts artifacts;
    TimingReport& timing = artifacts.timing;

    PatientData fixed = stage("preprocess", timing.mesh_generation,
                              [&] { return prepare_patient(config, false, out); });
    PatientData moving = stage("preprocess", timing.mesh_generation,
                               [&] { return prepare_patient(config, true, out); });

    stage("mesh", timing.mesh_generation, [&] {
        mesh_patient(config, fixed, out / "meshes", "fixed_");
        mesh_patient(config, moving, out / "meshes", "moving_");
    });

    artifacts.rigid = stage("rigid_prealign", timing.rigid_prealign, [&] {
        return rigid_prealign(all_mesh_vertices(moving), all_mesh_vertices(fixed));
    });

    const NearestVertexEstimator estimator(config.null_threshold);
    std::vector<CorrespondenceSet> sets = stage("correspond", timing.correspondence, [&] {
        std::vector<CorrespondenceSet> out_sets;
        for (const auto& [name, moving_mesh] : moving.meshes) {
            const auto it = fixed.meshes.find(name);
            if (it == fixed.meshes.end())
                throw DegenerateInputError("pipeline: no fixed mesh for structure " + name);
            bool use = name == "bone" || name == "envelope";
            for (const auto& s : config.structures)
                if (s.name == name) use = s.in_corrtps;
            if (!use) continue;
            out_sets.push_back(estimator.estimate(moving_mesh, it->second));
        }
        write_correspondences_csv(out_sets, out / "correspondences.csv");
        return out_sets;
    });

    const TpsModel model = stage("tps_fit", timing.tps_fit, [&] {
        const double min_spacing = std::min({moving.hu.geometry.spacing.x,
                                             moving.hu.geometry.spacing.y,
                                             moving.hu.geometry.spacing.z});
        ControlPointSet cps = gather_control_points(sets, 0.5 * min_spacing);
        if (config.max_control_points > 0 && cps.size() > config.max_control_points)
            cps = subsample_controls(cps, config.max_control_points,
                                     config.min_control_separation);
        artifacts.control_point_count = cps.size();
        std::vector<CorrespondenceSet> kept(1);
        kept[0].source_structure = "control_points";
        for (std::size_t i = 0; i < cps.size(); ++i)
            kept[0].pairs.push_back(
                CorrespondencePair{cps.sources[i], cps.targets[i], false, "control_points"});
        write_correspondences_csv(kept, out / "control_points.csv");
        TpsModel m = tps_fit(cps, config.lambda_tps);
        write_tps_model(m, out / "tps_model.bin");
        return m;
    });

    artifacts.field = stage("tps_field", timing.tps_fit, [&] {
        DisplacementField f =
            tps_field_on_grid(model, moving.hu.geometry, config.coarse_stride);
        write_field(f, out / "init_field.mhd");
        return f;
    });

    stage("resample", timing.resampling, [&] {
        artifacts.warped_fixed = warp_volume(artifacts.field, fixed.hu);
        write_metaimage(artifacts.warped_fixed, out / "init_warped.mhd");
        fs::create_directories(out / "warped_masks");
        fs::create_directories(out / "structure_masks");
        for (const auto& [name, mask] : fixed.organ_masks) {
            Mask w = warp_mask(artifacts.field, mask);
            write_mask(w, out / "warped_masks" / ("init_" + name + ".mhd"));
            artifacts.warped_fixed_masks[name] = std::move(w);
            write_mask(mask, out / "structure_masks" / ("fixed_" + name + ".mhd"));
        }
        for (const auto& [name, mask] : moving.organ_masks)
            write_mask(mask, out / "structure_masks" / ("moving_" + name + ".mhd"));
    });

    artifacts.fixed_masks = std::move(fixed.organ_masks);
    artifacts.moving_processed = std::move(moving.hu);
    artifacts.moving_masks = std::move(moving.organ_masks);

    std::ofstream tj(out / "timing_init.json");
    tj << timing.to_json() << "\n";
    return artifacts;
}

RegisterArtifacts run_register(const PipelineConfig& config) {
    RegisterArtifacts reg;
    reg.init = run_initialise(config);
    namespace fs = std::filesystem;
    const fs::path out = config.output_dir;
    TimingReport& timing = reg.init.timing;

    // Fixed-patient masks pulled straight through the init field serve as the
    // "fixed" side for further propagation; reload them for refinement paths.
    const GridGeometry& grid = reg.init.field.geometry;

    std::optional<DisplacementField> refine_field;
    if (!config.external_field.empty()) {
        refine_field = stage("refine", timing.refinement, [&] {
            DisplacementField f = read_field(config.external_field);
            if (!(f.geometry == grid))
                throw ContractError("external field geometry does not match the moving grid");
            return f;
        });
    } else if (config.refine_enabled) {
        refine_field = stage("refine", timing.refinement, [&] {
            const Volume fixed_norm =
                window_normalize(reg.init.warped_fixed, config.window_width,
                                 config.window_level);
            const Volume moving_norm = window_normalize(
                reg.init.moving_processed, config.window_width, config.window_level);
            return bspline_register(fixed_norm, moving_norm, config.refine_lattice_spacing,
                                    config.refine_bending_weight, config.refine_max_iters);
        });
    }

    stage("compose", timing.resampling, [&] {
        if (refine_field) {
            write_field(*refine_field, out / "refine_field.mhd");
            reg.total_field = compose_pullback(reg.init.field, *refine_field);
        } else {
            reg.total_field = reg.init.field;
        }
        write_field(reg.total_field, out / "total_field.mhd");
    });

    stage("metrics", timing.resampling, [&] {
        const Volume fixed_hu = read_metaimage(out / "fixed_volume.mhd");
        reg.final_warped = warp_volume(reg.total_field, fixed_hu);
        write_metaimage(reg.final_warped, out / "final_warped.mhd");

        const DisplacementField rigid_field = rigid_as_field(reg.init.rigid, grid);
        std::map<std::string, Mask> rigid_masks, refined_masks;
        for (const auto& [name, mask] : reg.init.fixed_masks) {
            rigid_masks[name] = warp_mask(rigid_field, mask);
            if (refine_field) refined_masks[name] = warp_mask(reg.total_field, mask);
        }
        reg.metrics_rigid = structure_metrics(rigid_masks, reg.init.moving_masks);
        reg.metrics_init =
            structure_metrics(reg.init.warped_fixed_masks, reg.init.moving_masks);
        if (refine_field)
            reg.metrics_refined = structure_metrics(refined_masks, reg.init.moving_masks);
        write_metrics_csv(reg.metrics_rigid, reg.metrics_init, reg.metrics_refined,
                          out / "metrics.csv");
    });

    std::ofstream tj(out / "timing_register.json");
    tj << timing.to_json() << "\n";
    return reg;
}

void write_metrics_csv(const std::vector<StructureDistanceResult>& rigid,
                       const std::vector<StructureDistanceResult>& init,
                       const std::vector<StructureDistanceResult>& refined,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics: " + path.string());
    out.precision(10);
    out << "structure,pipeline,mdta_mm,hausdorff_mm,dice\n";
    auto rows = [&](const std::vector<StructureDistanceResult>& v, const char* pipeline) {
        for (const auto& r : v)
            out << r.structure << ',' << pipeline << ',' << r.mdta << ',' << r.hausdorff << ','
                << r.dice << '\n';
    };
    rows(rigid, "rigid");
    rows(init, "init");
    rows(refined, "init_refine");
    if (!out) throw IoError("failed writing metrics: " + path.string());
}

std::string EvaluationReport::to_json() const {
    json j;
    j["bonferroni_threshold"] = threshold;
    j["n_pairs"] = n_pairs;
    j["structures"] = json::array();
    for (const auto& r : rows) {
        json row;
        row["structure"] = r.structure;
        row["mean_results"] = r.mean_results;
        row["mean_baseline"] = r.mean_baseline;
        row["wilcoxon_w"] = r.statistic;
        if (r.degenerate) row["degenerate"] = true;
        else row["p_value"] = r.p_value;
        row["significant"] = r.significant;
        j["structures"].push_back(row);
    }
    return j.dump(2);
}

namespace {

// structure -> metric value rows of one pipeline from a metrics CSV.
std::map<std::string, double> read_metric_rows(const std::filesystem::path& path,
                                               const std::string& pipeline,
                                               const std::string& metric) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics CSV: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty metrics CSV: " + path.string());
    std::vector<std::string> headers;
    {
        std::istringstream ss(line);
        std::string h;
        while (std::getline(ss, h, ',')) headers.push_back(h);
    }
    const auto metric_col = std::find(headers.begin(), headers.end(), metric);
    if (metric_col == headers.end())
        throw FormatError("metrics CSV lacks column " + metric + ": " + path.string());
    const std::size_t col = static_cast<std::size_t>(metric_col - headers.begin());
    std::map<std::string, double> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != headers.size())
            throw FormatError("ragged metrics CSV row: " + path.string());
        if (fields[1] != pipeline) continue;
        out[fields[0]] = std::stod(fields[col]);
    }
    return out;
}

} // namespace

EvaluationReport run_evaluate(const std::filesystem::path& results_dir,
                              const std::filesystem::path& baseline_dir,
                              const std::string& pipeline, const std::string& baseline_pipeline,
                              const std::string& metric, double alpha) {
    namespace fs = std::filesystem;
    const std::string base_pipe = baseline_pipeline.empty() ? pipeline : baseline_pipeline;
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(results_dir))
        if (entry.path().extension() == ".csv") names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.size() < 5)
        throw ContractError("run_evaluate: need at least 5 registration pairs");

    std::map<std::string, std::vector<double>> results, baseline;
    std::set<std::string> structures;
    for (const auto& name : names) {
        const auto r = read_metric_rows(results_dir / name, pipeline, metric);
        const fs::path b = baseline_dir / name;
        if (!fs::exists(b))
            throw ContractError("run_evaluate: baseline missing pair file " + name);
        const auto base = read_metric_rows(b, base_pipe, metric);
        if (structures.empty())
            for (const auto& [s, v] : r) structures.insert(s);
        if (r.size() != structures.size() || base.size() != structures.size())
            throw ContractError("run_evaluate: structure sets differ across pairs");
        for (const auto& s : structures) {
            if (!r.count(s) || !base.count(s))
                throw ContractError("run_evaluate: structure sets differ across pairs: " + s);
            results[s].push_back(r.at(s));
            baseline[s].push_back(base.at(s));
        }
    }

    EvaluationReport report;
    report.n_pairs = static_cast<int>(names.size());
    report.threshold = bonferroni_threshold(alpha, static_cast<int>(structures.size()));
    for (const auto& s : structures) {
        EvaluationRow row;
        row.structure = s;
        const auto& x = results.at(s);
        const auto& y = baseline.at(s);
        row.mean_results = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
        row.mean_baseline = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
        try {
            PairedTestResult t = wilcoxon_signed_rank(x, y);
            row.statistic = t.statistic;
            row.p_value = t.p_value;
            row.significant = t.p_value < report.threshold;
        } catch (const DegenerateInputError&) {
            row.degenerate = true;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace corrtps
