// Command-line front end: split, rephoto, score, evaluate, degrade,
// project, stats, correlate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rephoto/rephoto.hpp"

namespace fs = std::filesystem;
using namespace rephoto;

namespace {

/*
 * JSON config files mirror the long flag names of the selected
 * subcommand: {"folds": 4, "metrics": ["ncc", "census"]}. Flags given on
 * the command line win.
 */
class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(CLI::App const* root) : root_(root) {}

    std::string to_config(CLI::App const* app, bool default_also, bool, std::string) const override
    {
        nlohmann::json j = nlohmann::json::object();
        for (CLI::Option const* opt : app->get_options()) {
            if (!opt->get_configurable() || opt->get_lnames().empty())
                continue;
            std::string const& name = opt->get_lnames().front();
            if (opt->count() > 0) {
                auto const& r = opt->results();
                j[name] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
            } else if (default_also && !opt->get_default_str().empty()) {
                j[name] = opt->get_default_str();
            }
        }
        return j.dump(2) + "\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override
    {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (nlohmann::json::exception const& e) {
            throw CLI::ConfigError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!j.is_object())
            throw CLI::ConfigError("config file must contain a JSON object");
        std::vector<std::string> parents;
        auto const subs = root_->get_subcommands();
        if (!subs.empty())
            parents.push_back(subs.front()->get_name());
        std::vector<CLI::ConfigItem> items;
        for (auto const& [key, value] : j.items()) {
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array())
                for (auto const& v : value)
                    item.inputs.push_back(scalar(key, v));
            else
                item.inputs.push_back(scalar(key, value));
            items.push_back(std::move(item));
        }
        return items;
    }

private:
    static std::string scalar(std::string const& key, nlohmann::json const& v)
    {
        if (v.is_string())
            return v.get<std::string>();
        if (v.is_boolean())
            return v.get<bool>() ? "true" : "false";
        if (v.is_number())
            return v.dump();
        throw CLI::ConfigError("config key '" + key + "' must be a string, number, boolean or list");
    }

    CLI::App const* root_;
};

void progress(std::string const& line)
{
    static std::mutex m;
    std::lock_guard lock(m);
    std::cerr << line << '\n';
}

std::string fmt(double v, char const* spec = "%.6g")
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string fmt(std::optional<double> const& v) { return v ? fmt(*v) : "null"; }

std::vector<Metric> parse_metrics(std::vector<std::string> const& names)
{
    if (names.empty())
        throw ValidationError("--metrics must name at least one metric");
    std::vector<Metric> out;
    for (auto const& n : names) {
        Metric const m = parse_metric(n);
        if (std::find(out.begin(), out.end(), m) == out.end())
            out.push_back(m);
    }
    return out;
}

// Flags shared by several subcommands.
struct MetricFlags {
    int patch = 15;
    double min_valid = 0.5;
    std::vector<std::string> metrics{"ncc", "cbcr"};

    void add(CLI::App* sub, bool with_metrics = true)
    {
        sub->add_option("--patch-size", patch, "Patch side length in pixels (odd, >= 3)")
            ->capture_default_str();
        sub->add_option("--min-valid-fraction", min_valid,
                        "Minimum fraction of valid positions in a patch")
            ->capture_default_str();
        if (with_metrics)
            sub->add_option("--metrics", metrics, "Comma-separated metrics: cbcr,ncc,zssd,dssim,census")
                ->delimiter(',')
                ->capture_default_str();
    }
};

struct RenderFlags {
    int splat_k = 6;
    double splat_scale = 1.0;
    std::string texture_filter = "bilinear";
    bool backface_culling = false;

    void add(CLI::App* sub)
    {
        sub->add_option("--splat-k", splat_k, "Neighbors used for splat radii")
            ->capture_default_str();
        sub->add_option("--splat-scale", splat_scale, "Multiplier on estimated splat radii")
            ->capture_default_str();
        sub->add_option("--texture-filter", texture_filter, "nearest or bilinear")
            ->capture_default_str();
        sub->add_flag("--backface-culling", backface_culling, "Skip back-facing triangles");
    }

    RenderOptions options() const
    {
        RenderOptions o;
        if (texture_filter == "nearest")
            o.texture_filter = TextureFilter::nearest;
        else if (texture_filter == "bilinear")
            o.texture_filter = TextureFilter::bilinear;
        else
            throw ValidationError("--texture-filter must be nearest or bilinear");
        o.backface_culling = backface_culling;
        o.threads = 1;  // parallelism is spent across views
        return o;
    }

    void validate() const
    {
        if (splat_k < 1)
            throw ValidationError("--splat-k must be at least 1");
        if (!(splat_scale > 0.0))
            throw ValidationError("--splat-scale must be positive");
        options();
    }
};

bool has_fold_placeholder(std::string const& s) { return s.find("{fold}") != std::string::npos; }

/// One model, or one per fold when the path contains {fold}.
template <typename Load>
auto load_models(std::string const& pattern, std::size_t folds, Load&& load)
{
    using T = std::decay_t<decltype(load(fs::path{}))>;
    std::vector<std::shared_ptr<T const>> models;
    std::size_t const n = has_fold_placeholder(pattern) ? folds : 1;
    for (std::size_t f = 0; f < n; ++f) {
        auto const path = expand_fold(pattern, f);
        progress("loading model " + path.string());
        models.push_back(std::make_shared<T const>(load(path)));
    }
    return models;
}

PointCloud load_cloud_with_radii(fs::path const& path, RenderFlags const& rf)
{
    PointCloud cloud = load_point_cloud(path);
    if (!cloud.has_radii())
        cloud = estimate_splat_radii(std::move(cloud), rf.splat_k, rf.splat_scale);
    return cloud;
}

RephotoProvider internal_provider(EvalMode mode, std::string const& model, std::size_t folds,
                                  RenderFlags const& rf)
{
    if (model.empty())
        throw ValidationError("--model is required in internal modes");
    if (mode == EvalMode::internal_mesh)
        return mesh_rephotos(load_models(model, folds, [](fs::path const& p) { return load_mesh(p); }),
                             rf.options());
    return pointcloud_rephotos(
        load_models(model, folds, [&](fs::path const& p) { return load_cloud_with_radii(p, rf); }),
        rf.options());
}

/// Reads one numeric column (by header name) from a CSV file; empty cells become nullopt.
std::vector<std::optional<double>> read_csv_column(fs::path const& path, std::string const& column)
{
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError(path.string() + " is empty");
    auto split_row = [](std::string const& row) {
        std::vector<std::string> cells;
        std::stringstream ss(row);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (!row.empty() && row.back() == ',')
            cells.emplace_back();
        return cells;
    };
    auto const header = split_row(line);
    auto const it = std::find(header.begin(), header.end(), column);
    if (it == header.end())
        throw ValidationError("column '" + column + "' not found in " + path.string());
    auto const col = static_cast<std::size_t>(it - header.begin());
    std::vector<std::optional<double>> values;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto const cells = split_row(line);
        if (col >= cells.size() || cells[col].empty()) {
            values.emplace_back();
            continue;
        }
        try {
            std::size_t used = 0;
            double const v = std::stod(cells[col], &used);
            if (used != cells[col].size())
                throw std::invalid_argument(cells[col]);
            values.emplace_back(v);
        } catch (std::exception const&) {
            throw ValidationError("non-numeric value '" + cells[col] + "' in column '" + column + "'");
        }
    }
    return values;
}

std::vector<double> defined_values(std::vector<std::optional<double>> const& v)
{
    std::vector<double> out;
    for (auto const& x : v)
        if (x)
            out.push_back(*x);
    return out;
}

void print_boxplot(std::string const& label, BoxplotStats const& s)
{
    std::printf("%-14s min %-12s q1 %-12s median %-12s q3 %-12s max %s\n", label.c_str(),
                fmt(s.min).c_str(), fmt(s.q1).c_str(), fmt(s.median).c_str(), fmt(s.q3).c_str(),
                fmt(s.max).c_str());
}

void print_summary(EvaluationReport const& report, std::vector<Metric> const& metrics)
{
    for (auto const& v : report.per_view) {
        std::string line = v.view_id + "  fold " + std::to_string(v.fold) +
                           "  completeness " + fmt(v.completeness);
        for (Metric m : metrics)
            line += "  " + std::string(to_string(m)) + " " + fmt(v.errors.at(m));
        std::puts(line.c_str());
    }
    std::printf("\n%-10s %-8s %-14s", "", "views", "completeness");
    for (Metric m : metrics)
        std::printf(" %-14s", std::string(to_string(m)).c_str());
    std::printf("\n");
    auto row = [&](std::string const& label, Aggregate const& a) {
        std::printf("%-10s %-8zu %-14s", label.c_str(), a.views, fmt(a.completeness).c_str());
        for (Metric m : metrics)
            std::printf(" %-14s", fmt(a.errors.at(m)).c_str());
        std::printf("\n");
    };
    for (std::size_t f = 0; f < report.per_fold.size() && report.per_fold.size() > 1; ++f)
        row("fold " + std::to_string(f), report.per_fold[f]);
    row("all", report.aggregate);
    if (report.warnings > 0)
        std::printf("warning: %zu view(s) have an undefined metric\n", report.warnings);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Rephoto-based evaluation of 3D reconstructions"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.config_formatter(std::make_shared<JsonConfig>(&app));
    app.set_config("--config", "", "JSON file with flag values (flags on the command line win)");

    unsigned threads = 0;
    auto add_threads = [&](CLI::App* sub) {
        sub->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    };

    // split
    std::string manifest_path;
    int folds = 0;
    std::uint64_t seed = 0;
    std::string out;
    auto* split_cmd = app.add_subcommand("split", "Partition views into cross-validation folds");
    split_cmd->add_option("--manifest", manifest_path, "View manifest (JSON)")->required();
    split_cmd->add_option("--folds", folds, "Number of folds (>= 2)")->required();
    split_cmd->add_option("--seed", seed, "Shuffle seed")->capture_default_str();
    split_cmd->add_option("--out", out, "Output JSON file (stdout if omitted)");

    // rephoto
    std::string model;
    std::string mode_name = "internal-mesh";
    RenderFlags render_flags;
    std::vector<std::string> view_filter;
    auto* rephoto_cmd = app.add_subcommand("rephoto", "Render rephotos and masks for manifest views");
    rephoto_cmd->add_option("--manifest", manifest_path, "View manifest (JSON)")->required();
    rephoto_cmd->add_option("--model", model, "Model file (.ply or .obj)")->required();
    rephoto_cmd->add_option("--mode", mode_name, "internal-mesh or internal-pointcloud")
        ->capture_default_str();
    rephoto_cmd->add_option("--out", out, "Output directory")->required();
    rephoto_cmd->add_option("--views", view_filter, "Only these view ids")->delimiter(',');
    render_flags.add(rephoto_cmd);
    add_threads(rephoto_cmd);

    // score
    MetricFlags metric_flags;
    std::string photo_path, rephoto_path_arg, mask_path, error_dir;
    auto* score_cmd = app.add_subcommand("score", "Score one rephoto against its photo");
    score_cmd->add_option("--photo", photo_path, "Photo (PNG)")->required();
    score_cmd->add_option("--rephoto", rephoto_path_arg, "Rephoto (PNG)")->required();
    score_cmd->add_option("--mask", mask_path, "Rephoto mask (PNG); all valid if omitted");
    score_cmd->add_option("--out", error_dir, "Directory for <metric>.pfm error images");
    metric_flags.add(score_cmd);

    // evaluate
    std::string rephoto_dir;
    bool timings = false;
    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a model or rephoto set over a manifest");
    eval_cmd->add_option("--manifest", manifest_path, "View manifest (JSON)")->required();
    eval_cmd->add_option("--model", model, "Model file; may contain {fold}");
    eval_cmd->add_option("--rephotos", rephoto_dir,
                         "External mode: directory with <id>.png and <id>.mask.png; may contain {fold}");
    eval_cmd->add_option("--mode", mode_name, "internal-mesh, internal-pointcloud or external")
        ->capture_default_str();
    eval_cmd->add_option("--folds", folds, "Cross-validation folds (0 = evaluate every view, no split)")
        ->capture_default_str();
    eval_cmd->add_option("--seed", seed, "Split seed")->capture_default_str();
    eval_cmd->add_option("--out", out, "Output directory")->required();
    eval_cmd->add_flag("--timings", timings, "Record wall-clock time in the report");
    metric_flags.add(eval_cmd);
    render_flags.add(eval_cmd);
    add_threads(eval_cmd);

    // degrade
    DegradationParams degrade_params;
    std::optional<double> tex, geom, simp;
    std::string in_model, out_model;
    auto* degrade_cmd = app.add_subcommand("degrade", "Apply one synthetic degradation to a mesh");
    auto* tex_opt = degrade_cmd->add_option("--tex", tex, "Texture noise: max per-channel offset");
    auto* geom_opt =
        degrade_cmd->add_option("--geom", geom, "Geometry noise: max offset as a fraction of the extent");
    auto* simp_opt = degrade_cmd->add_option("--simp", simp, "Fraction of vertices to eliminate");
    tex_opt->excludes(geom_opt)->excludes(simp_opt);
    geom_opt->excludes(simp_opt);
    degrade_cmd->add_option("--seed", degrade_params.seed, "Noise / tie-break seed")
        ->capture_default_str();
    degrade_cmd->add_option("--freq", degrade_params.frequency,
                            "Noise cycles per bounding-box diagonal")
        ->capture_default_str();
    degrade_cmd->add_option("input", in_model, "Input mesh (.ply or .obj)")->required();
    degrade_cmd->add_option("output", out_model, "Output mesh (.ply)")->required();

    // project
    std::string errors_dir, metric_name = "ncc";
    auto* project_cmd =
        app.add_subcommand("project", "Project error images onto a model and color it");
    project_cmd->add_option("--model", model, "Model (.ply or .obj)")->required();
    project_cmd->add_option("--manifest", manifest_path, "View manifest (JSON)")->required();
    project_cmd->add_option("--errors", errors_dir, "Directory with <id>_<metric>.pfm")->required();
    project_cmd->add_option("--metric", metric_name, "Metric whose error images are used")
        ->capture_default_str();
    project_cmd->add_option("--out", out, "Output PLY")->required();
    render_flags.add(project_cmd);
    add_threads(project_cmd);

    // stats
    std::vector<double> values;
    std::string csv_path, column;
    auto* stats_cmd = app.add_subcommand("stats", "Boxplot statistics of a list of values");
    stats_cmd->add_option("values", values, "Values");
    stats_cmd->add_option("--csv", csv_path, "CSV file to read a column from");
    stats_cmd->add_option("--column", column, "CSV column name");

    // correlate
    std::vector<double> xs, ys;
    std::string x_col, y_col;
    auto* corr_cmd = app.add_subcommand("correlate", "Pearson correlation of two series");
    corr_cmd->add_option("--xs", xs, "First series")->delimiter(',');
    corr_cmd->add_option("--ys", ys, "Second series")->delimiter(',');
    corr_cmd->add_option("--csv", csv_path, "CSV file holding both series");
    corr_cmd->add_option("--x", x_col, "CSV column of the first series");
    corr_cmd->add_option("--y", y_col, "CSV column of the second series");

    for (auto* sub : app.get_subcommands({}))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const& e) {
        return app.exit(e);
    } catch (CLI::CallForAllHelp const& e) {
        return app.exit(e);
    } catch (CLI::ParseError const& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        CLI::App const* failing = &app;
        for (auto const* sub : app.get_subcommands())
            failing = sub;
        std::cerr << failing->help();
        return exit_code::validation;
    }

    try {
        unsigned const workers = resolve_threads(threads);

        if (*split_cmd) {
            auto const plan = split(load_manifest(manifest_path), folds, seed);
            std::string const text = split_to_json(plan).dump(2) + "\n";
            if (out.empty())
                std::cout << text;
            else
                write_text_file(out, text);
            for (std::size_t f = 0; f < plan.folds.size(); ++f)
                progress("fold " + std::to_string(f) + ": " +
                         std::to_string(plan.folds[f].eval_ids.size()) + " eval views");
        }

        if (*rephoto_cmd) {
            render_flags.validate();
            EvalMode const mode = parse_eval_mode(mode_name);
            if (mode == EvalMode::external)
                throw ValidationError("rephoto renders internally; use internal-mesh or internal-pointcloud");
            if (has_fold_placeholder(model))
                throw ValidationError("rephoto takes a single model; {fold} is only for evaluate");
            auto const manifest = load_manifest(manifest_path);
            std::vector<View const*> views;
            for (auto const& v : manifest.views)
                if (view_filter.empty() ||
                    std::find(view_filter.begin(), view_filter.end(), v.id) != view_filter.end())
                    views.push_back(&v);
            for (auto const& id : view_filter)
                if (!manifest.find(id))
                    throw ValidationError("unknown view id '" + id + "'");
            auto const provider = internal_provider(mode, model, 1, render_flags);
            parallel_for(views.size(), workers, [&](std::size_t i) {
                View const& v = *views[i];
                Rephoto const rp = provider(v, 0);
                save_image(rp.color, rephoto_path(out, v.id));
                save_mask(rp.mask, rephoto_mask_path(out, v.id));
                progress(v.id + "  completeness " + fmt(completeness(rp.mask)));
            });
        }

        if (*score_cmd) {
            auto const metrics = parse_metrics(metric_flags.metrics);
            RgbImage const photo = load_image(photo_path);
            RgbImage const rephoto = load_image(rephoto_path_arg);
            Mask const mask = mask_path.empty() ? Mask(photo.width(), photo.height(), 255)
                                                : load_mask(mask_path);
            std::printf("completeness %s\n", fmt(completeness(mask), "%.17g").c_str());
            for (Metric m : metrics) {
                MetricConfig const cfg{m, metric_flags.patch, metric_flags.min_valid};
                ErrorImage const err = compute_error(photo, rephoto, mask, cfg);
                auto const mean = mean_error(err);
                std::printf("%s %s\n", std::string(to_string(m)).c_str(),
                            mean ? fmt(*mean, "%.17g").c_str() : "null");
                if (!error_dir.empty())
                    save_pfm(err.to_nan_image(), fs::path(error_dir) / (std::string(to_string(m)) + ".pfm"));
            }
        }

        if (*eval_cmd) {
            render_flags.validate();
            EvalConfig cfg;
            cfg.metrics = parse_metrics(metric_flags.metrics);
            cfg.patch = metric_flags.patch;
            cfg.min_valid_fraction = metric_flags.min_valid;
            cfg.mode = parse_eval_mode(mode_name);
            cfg.threads = workers;
            cfg.timings = timings;
            cfg.validate();

            auto const manifest = load_manifest(manifest_path);
            SplitPlan const plan = folds == 0 ? no_split(manifest) : split(manifest, folds, seed);
            if (!plan.cross_validation)
                progress("note: no cross-validation; every view is scored against the full model");

            RephotoProvider provider;
            if (cfg.mode == EvalMode::external) {
                if (rephoto_dir.empty())
                    throw ValidationError("--rephotos is required in external mode");
                if (!model.empty())
                    throw ValidationError("--model is not used in external mode");
                provider = external_rephotos(rephoto_dir);
                cfg.echo["source"] = rephoto_dir;
            } else {
                if (!rephoto_dir.empty())
                    throw ValidationError("--rephotos is only used in external mode");
                provider = internal_provider(cfg.mode, model, plan.folds.size(), render_flags);
                cfg.echo["source"] = model;
                if (cfg.mode == EvalMode::internal_pointcloud) {
                    cfg.echo["splat_k"] = render_flags.splat_k;
                    cfg.echo["splat_scale"] = render_flags.splat_scale;
                } else {
                    cfg.echo["texture_filter"] = render_flags.texture_filter;
                    cfg.echo["backface_culling"] = render_flags.backface_culling;
                }
            }
            cfg.echo["manifest"] = manifest_path;

            fs::path const out_dir = out;
            auto const error_dir_path = out_dir / "errors";
            auto sink = [&](View const& view, Metric m, ErrorImage const& err) {
                save_pfm(err.to_nan_image(), error_image_path(error_dir_path, view.id, m));
            };
            auto tracked = [&](View const& view, std::size_t fold) {
                Rephoto rp = provider(view, fold);
                progress("scoring " + view.id + " (fold " + std::to_string(fold) + ")");
                return rp;
            };
            auto const report = evaluate(manifest, plan, cfg, tracked, load_photo, sink);
            write_report(report, out_dir);
            print_summary(report, cfg.metrics);
            progress("wrote " + (out_dir / "report.json").string());
        }

        if (*degrade_cmd) {
            if (!tex && !geom && !simp)
                throw ValidationError("give exactly one of --tex, --geom or --simp");
            TriMesh mesh = load_mesh(in_model);
            if (tex) {
                degrade_params.n_tex = *tex;
                mesh = texture_noise(std::move(mesh), degrade_params);
            } else if (geom) {
                degrade_params.n_geom = *geom;
                mesh = geometry_noise(std::move(mesh), degrade_params);
            } else {
                degrade_params.n_simp = *simp;
                degrade_params.validate();
                std::size_t performed = 0;
                std::size_t const before = mesh.vertex_count();
                mesh = simplify(mesh, *simp, degrade_params.seed, &performed);
                progress("collapsed " + std::to_string(performed) + " of " +
                         std::to_string(static_cast<std::size_t>(*simp * static_cast<double>(before))) +
                         " requested edges; " + std::to_string(mesh.vertex_count()) + " vertices left");
            }
            if (mesh.has_texture())
                progress("note: the texture image is not written; PLY output keeps geometry and colors");
            save_ply(mesh, out_model);
        }

        if (*project_cmd) {
            render_flags.validate();
            Metric const metric = parse_metric(metric_name);
            auto const manifest = load_manifest(manifest_path);
            auto const opts = render_flags.options();
            bool const is_cloud = fs::path(model).extension() == ".ply" &&
                                  std::holds_alternative<PointCloud>(load_ply(model));
            TriMesh mesh;
            PointCloud cloud;
            if (is_cloud)
                cloud = load_cloud_with_radii(model, render_flags);
            else
                mesh = load_mesh(model);
            std::size_t const n = is_cloud ? cloud.size() : mesh.vertex_count();

            std::vector<View const*> used;
            for (auto const& v : manifest.views)
                if (fs::exists(error_image_path(errors_dir, v.id, metric)))
                    used.push_back(&v);
            if (used.empty())
                throw ValidationError("no <id>_" + metric_name + ".pfm files for manifest views in " +
                                      errors_dir);
            std::vector<VertexErrorField> partial(used.size(), VertexErrorField(n));
            parallel_for(used.size(), workers, [&](std::size_t i) {
                View const& v = *used[i];
                auto const err =
                    ErrorImage::from_nan_image(load_pfm(error_image_path(errors_dir, v.id, metric)));
                if (is_cloud)
                    accumulate(partial[i], cloud, render_pointcloud(cloud, v.camera, opts), err);
                else
                    accumulate(partial[i], mesh, render_mesh(mesh, v.camera, opts), err);
                progress("projected " + v.id);
            });
            VertexErrorField field(n);
            for (auto const& p : partial)
                field.merge(p);
            std::size_t covered = 0;
            for (std::size_t v = 0; v < n; ++v)
                covered += field.mean(v).has_value();
            if (is_cloud)
                export_error_cloud(cloud, field, out);
            else
                export_error_mesh(mesh, field, out);
            std::printf("views %zu  covered vertices %zu of %zu\n", used.size(), covered, n);
        }

        if (*stats_cmd) {
            if (!csv_path.empty()) {
                if (column.empty())
                    throw ValidationError("--csv needs --column");
                auto const col = defined_values(read_csv_column(csv_path, column));
                values.insert(values.end(), col.begin(), col.end());
            }
            print_boxplot("values " + std::to_string(values.size()), boxplot_stats(values));
        }

        if (*corr_cmd) {
            if (!csv_path.empty()) {
                if (x_col.empty() || y_col.empty())
                    throw ValidationError("--csv needs --x and --y column names");
                auto const cx = read_csv_column(csv_path, x_col);
                auto const cy = read_csv_column(csv_path, y_col);
                for (std::size_t i = 0; i < cx.size(); ++i) {
                    if (cx[i] && cy[i]) {
                        xs.push_back(*cx[i]);
                        ys.push_back(*cy[i]);
                    }
                }
            }
            std::printf("pearson %s  (n = %zu)\n", fmt(pearson(xs, ys), "%.17g").c_str(), xs.size());
        }
    } catch (ValidationError const& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code::validation;
    } catch (IoError const& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return exit_code::io;
    } catch (InvariantError const& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return exit_code::invariant;
    } catch (std::exception const& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return exit_code::invariant;
    }
    return exit_code::success;
}
