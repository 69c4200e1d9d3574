#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rephoto/error.hpp"
#include "rephoto/image_io.hpp"
#include "rephoto/mesh_io.hpp"
#include "rephoto/metrics.hpp"
#include "rephoto/parallel.hpp"
#include "rephoto/rasterizer.hpp"
#include "rephoto/scene.hpp"
#include "rephoto/stats.hpp"

namespace rephoto {

// ---------------------------------------------------------------------------
// Cross-validation splits

struct Fold {
    std::vector<std::string> train_ids;
    std::vector<std::string> eval_ids;
};

struct SplitPlan {
    std::vector<Fold> folds;
    int n_folds = 0;
    std::uint64_t seed = 0;
    bool cross_validation = true;
};

/*
 * Seeded shuffle followed by round-robin assignment: the view at shuffled
 * position i is evaluated in fold i mod n. Ids keep manifest order inside
 * each list.
 */
inline SplitPlan split(ViewManifest const& manifest, int n_folds, std::uint64_t seed)
{
    std::size_t const n = manifest.views.size();
    if (n_folds < 2 || static_cast<std::size_t>(n_folds) > n)
        throw ValidationError("fold count must be between 2 and the number of views (" +
                              std::to_string(n) + ")");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        auto const j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(order[i], order[j]);
    }
    std::vector<int> fold_of(n);
    for (std::size_t pos = 0; pos < n; ++pos)
        fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(n_folds));

    SplitPlan plan;
    plan.n_folds = n_folds;
    plan.seed = seed;
    plan.folds.resize(n_folds);
    for (std::size_t v = 0; v < n; ++v)
        for (int f = 0; f < n_folds; ++f)
            (fold_of[v] == f ? plan.folds[f].eval_ids : plan.folds[f].train_ids)
                .push_back(manifest.views[v].id);
    return plan;
}

/// Every view is evaluated against a model built from all views.
inline SplitPlan no_split(ViewManifest const& manifest)
{
    SplitPlan plan;
    plan.n_folds = 1;
    plan.cross_validation = false;
    Fold fold;
    for (auto const& v : manifest.views) {
        fold.train_ids.push_back(v.id);
        fold.eval_ids.push_back(v.id);
    }
    plan.folds.push_back(std::move(fold));
    return plan;
}

inline nlohmann::json split_to_json(SplitPlan const& plan)
{
    nlohmann::json folds = nlohmann::json::array();
    for (auto const& f : plan.folds)
        folds.push_back({{"train", f.train_ids}, {"eval", f.eval_ids}});
    return {{"n_folds", plan.n_folds},
            {"seed", plan.seed},
            {"cross_validation", plan.cross_validation},
            {"folds", folds}};
}

// ---------------------------------------------------------------------------
// Evaluation

enum class EvalMode { internal_mesh, internal_pointcloud, external };

inline std::string_view to_string(EvalMode m)
{
    switch (m) {
    case EvalMode::internal_mesh: return "internal-mesh";
    case EvalMode::internal_pointcloud: return "internal-pointcloud";
    case EvalMode::external: return "external";
    }
    return "?";
}

inline EvalMode parse_eval_mode(std::string_view s)
{
    for (auto m : {EvalMode::internal_mesh, EvalMode::internal_pointcloud, EvalMode::external})
        if (to_string(m) == s)
            return m;
    throw ValidationError("unknown mode '" + std::string(s) +
                          "' (expected internal-mesh, internal-pointcloud or external)");
}

struct EvalConfig {
    std::vector<Metric> metrics = {Metric::ncc, Metric::cbcr};
    int patch = 15;
    double min_valid_fraction = 0.5;
    EvalMode mode = EvalMode::internal_mesh;
    unsigned threads = 1;
    bool timings = false;
    /// Extra fields echoed verbatim into the report's config block.
    nlohmann::json echo = nlohmann::json::object();

    MetricConfig metric_config(Metric m) const { return {m, patch, min_valid_fraction}; }

    void validate() const
    {
        if (metrics.empty())
            throw ValidationError("at least one metric is required");
        metric_config(Metric::ncc).validate();
    }
};

struct Rephoto {
    RgbImage color;
    Mask mask;
};

/// Produces the rephoto of `view` for the model of fold `fold`.
using RephotoProvider = std::function<Rephoto(View const& view, std::size_t fold)>;
using PhotoProvider = std::function<RgbImage(View const& view)>;
/// Receives every error image; may be called from several threads at once.
using ErrorSink = std::function<void(View const& view, Metric metric, ErrorImage const& error)>;

inline RgbImage load_photo(View const& view) { return load_image(view.photo_path); }

struct ViewResult {
    std::string view_id;
    int fold = 0;
    double completeness = 0.0;
    std::map<Metric, std::optional<double>> errors;
};

struct Aggregate {
    std::size_t views = 0;
    double completeness = 0.0;
    std::map<Metric, std::optional<double>> errors;
    std::map<Metric, std::size_t> null_counts;
};

struct EvaluationReport {
    nlohmann::json config;
    bool cross_validation = true;
    std::vector<ViewResult> per_view;  // sorted by view id
    Aggregate aggregate;
    std::vector<Aggregate> per_fold;
    std::map<std::string, std::optional<BoxplotStats>> boxplot;  // "completeness" or metric
    std::size_t warnings = 0;  // views with at least one null metric
    std::optional<double> elapsed_seconds;
};

namespace detail {

/// Equal weight per view; null errors are excluded and counted.
inline Aggregate aggregate(std::vector<ViewResult const*> const& views,
                           std::vector<Metric> const& metrics)
{
    Aggregate agg;
    agg.views = views.size();
    double completeness = 0.0;
    for (auto const* v : views)
        completeness += v->completeness;
    agg.completeness = views.empty() ? 0.0 : completeness / static_cast<double>(views.size());
    for (Metric m : metrics) {
        double sum = 0.0;
        std::size_t n = 0, nulls = 0;
        for (auto const* v : views) {
            auto const& e = v->errors.at(m);
            if (e) {
                sum += *e;
                ++n;
            } else {
                ++nulls;
            }
        }
        agg.errors[m] = n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt;
        agg.null_counts[m] = nulls;
    }
    return agg;
}

}  // namespace detail

/*
 * Scores every eval view of every fold: obtains the rephoto and mask,
 * loads the photo, computes completeness and each metric's mean error,
 * then aggregates per fold and overall. Views run in parallel; the
 * reduction happens in view-id order so the result is schedule
 * independent.
 */
inline EvaluationReport evaluate(ViewManifest const& manifest, SplitPlan const& plan,
                                 EvalConfig const& cfg, RephotoProvider const& rephotos,
                                 PhotoProvider const& photos = load_photo,
                                 ErrorSink const& sink = {})
{
    cfg.validate();
    auto const start = std::chrono::steady_clock::now();

    struct Task {
        View const* view;
        std::size_t fold;
    };
    std::vector<Task> tasks;
    std::map<std::string, std::size_t> seen;
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        for (auto const& id : plan.folds[f].eval_ids) {
            View const* view = manifest.find(id);
            if (!view)
                throw ValidationError("split references unknown view '" + id + "'");
            if (!seen.emplace(id, f).second)
                throw ValidationError("view '" + id + "' is evaluated in more than one fold");
            tasks.push_back({view, f});
        }
    }
    if (tasks.empty())
        throw ValidationError("evaluation set is empty");
    std::sort(tasks.begin(), tasks.end(),
              [](Task const& a, Task const& b) { return a.view->id < b.view->id; });

    std::vector<ViewResult> results(tasks.size());
    parallel_for(tasks.size(), cfg.threads, [&](std::size_t i) {
        View const& view = *tasks[i].view;
        Rephoto const rp = rephotos(view, tasks[i].fold);
        RgbImage const photo = photos(view);
        int const w = view.camera.width, h = view.camera.height;
        if (!photo.same_size(w, h))
            throw ValidationError("photo of view '" + view.id + "' is " +
                                  std::to_string(photo.width()) + "x" +
                                  std::to_string(photo.height()) + " but the camera expects " +
                                  std::to_string(w) + "x" + std::to_string(h));
        if (!rp.color.same_size(w, h) || !rp.mask.same_size(w, h))
            throw ValidationError("rephoto or mask of view '" + view.id +
                                  "' does not match the camera size");
        ViewResult r;
        r.view_id = view.id;
        r.fold = static_cast<int>(tasks[i].fold);
        r.completeness = completeness(rp.mask);
        for (Metric m : cfg.metrics) {
            ErrorImage const err = compute_error(photo, rp.color, rp.mask, cfg.metric_config(m));
            r.errors[m] = mean_error(err);
            if (sink)
                sink(view, m, err);
        }
        results[i] = std::move(r);
    });

    EvaluationReport report;
    report.cross_validation = plan.cross_validation;
    report.per_view = std::move(results);

    std::vector<ViewResult const*> all;
    for (auto const& r : report.per_view)
        all.push_back(&r);
    report.aggregate = detail::aggregate(all, cfg.metrics);
    for (auto const& r : report.per_view)
        for (auto const& [m, e] : r.errors)
            if (!e) {
                ++report.warnings;
                break;
            }

    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        std::vector<ViewResult const*> members;
        for (auto const& r : report.per_view)
            if (static_cast<std::size_t>(r.fold) == f)
                members.push_back(&r);
        report.per_fold.push_back(detail::aggregate(members, cfg.metrics));
    }

    auto box = [&](auto get) -> std::optional<BoxplotStats> {
        std::vector<double> values;
        for (auto const& a : report.per_fold)
            if (auto v = get(a))
                values.push_back(*v);
        if (values.empty())
            return std::nullopt;
        return boxplot_stats(values);
    };
    report.boxplot["completeness"] =
        box([](Aggregate const& a) -> std::optional<double> { return a.completeness; });
    for (Metric m : cfg.metrics)
        report.boxplot[std::string(to_string(m))] =
            box([m](Aggregate const& a) { return a.errors.at(m); });

    std::vector<std::string> metric_names;
    for (Metric m : cfg.metrics)
        metric_names.emplace_back(to_string(m));
    report.config = cfg.echo;
    report.config["metrics"] = metric_names;
    report.config["patch_size"] = cfg.patch;
    report.config["min_valid_fraction"] = cfg.min_valid_fraction;
    report.config["mode"] = std::string(to_string(cfg.mode));
    report.config["folds"] = plan.n_folds;
    report.config["seed"] = plan.seed;
    report.config["cross_validation"] = plan.cross_validation;

    if (cfg.timings)
        report.elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// ---------------------------------------------------------------------------
// Rephoto providers

/// Rounds the rendered color to 8 bits, exactly what writing and reading
/// back a PNG rephoto yields.
inline Rephoto to_rephoto(RenderOutput const& render)
{
    return {quantize_8bit(render.color), render.mask};
}

/// `models` holds either one model for all folds or one per fold.
inline RephotoProvider mesh_rephotos(std::vector<std::shared_ptr<TriMesh const>> models,
                                     RenderOptions opts = {})
{
    if (models.empty())
        throw ValidationError("no model given");
    for (auto const& m : models)
        if (!m->has_colors() && !m->has_texture())
            throw ValidationError("mesh has neither vertex colors nor a texture");
    return [models = std::move(models), opts](View const& view, std::size_t fold) {
        auto const& mesh = *models[models.size() == 1 ? 0 : fold];
        return to_rephoto(render_mesh(mesh, view.camera, opts));
    };
}

inline RephotoProvider pointcloud_rephotos(std::vector<std::shared_ptr<PointCloud const>> clouds,
                                           RenderOptions opts = {})
{
    if (clouds.empty())
        throw ValidationError("no model given");
    return [clouds = std::move(clouds), opts](View const& view, std::size_t fold) {
        auto const& cloud = *clouds[clouds.size() == 1 ? 0 : fold];
        return to_rephoto(render_pointcloud(cloud, view.camera, opts));
    };
}

inline std::filesystem::path rephoto_path(std::filesystem::path const& dir, std::string const& id)
{
    return dir / (id + ".png");
}

inline std::filesystem::path rephoto_mask_path(std::filesystem::path const& dir,
                                               std::string const& id)
{
    return dir / (id + ".mask.png");
}

/// Replaces "{fold}" in a path template with the fold index.
inline std::filesystem::path expand_fold(std::string const& pattern, std::size_t fold)
{
    std::string out = pattern;
    std::string const key = "{fold}";
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos))
        out.replace(pos, key.size(), std::to_string(fold));
    return out;
}

/// Reads <dir>/<id>.png and <dir>/<id>.mask.png; `dir` may contain {fold}.
inline RephotoProvider external_rephotos(std::string dir_pattern)
{
    return [dir_pattern = std::move(dir_pattern)](View const& view, std::size_t fold) {
        auto const dir = expand_fold(dir_pattern, fold);
        auto const color_path = rephoto_path(dir, view.id);
        auto const mask_path = rephoto_mask_path(dir, view.id);
        if (!std::filesystem::exists(color_path))
            throw IoError("missing rephoto " + color_path.string());
        if (!std::filesystem::exists(mask_path))
            throw IoError("missing rephoto mask " + mask_path.string());
        Rephoto rp{load_image(color_path), load_mask(mask_path)};
        if (!rp.color.same_size(rp.mask))
            throw ValidationError("rephoto and mask of view '" + view.id + "' differ in size");
        return rp;
    };
}

// ---------------------------------------------------------------------------
// Report serialization

namespace detail {

inline nlohmann::json optional_json(std::optional<double> const& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json aggregate_json(Aggregate const& a)
{
    nlohmann::json errors = nlohmann::json::object();
    nlohmann::json nulls = nlohmann::json::object();
    for (auto const& [m, e] : a.errors)
        errors[std::string(to_string(m))] = optional_json(e);
    for (auto const& [m, n] : a.null_counts)
        nulls[std::string(to_string(m))] = n;
    return {{"views", a.views},
            {"completeness", a.completeness},
            {"errors", errors},
            {"null_counts", nulls}};
}

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline nlohmann::json report_to_json(EvaluationReport const& report)
{
    nlohmann::json per_view = nlohmann::json::array();
    for (auto const& v : report.per_view) {
        nlohmann::json errors = nlohmann::json::object();
        for (auto const& [m, e] : v.errors)
            errors[std::string(to_string(m))] = detail::optional_json(e);
        per_view.push_back({{"view_id", v.view_id},
                            {"fold", v.fold},
                            {"completeness", v.completeness},
                            {"errors", errors}});
    }
    nlohmann::json per_fold = nlohmann::json::array();
    for (std::size_t f = 0; f < report.per_fold.size(); ++f) {
        auto j = detail::aggregate_json(report.per_fold[f]);
        j["fold"] = f;
        per_fold.push_back(j);
    }
    nlohmann::json boxplot = nlohmann::json::object();
    for (auto const& [name, stats] : report.boxplot) {
        if (stats)
            boxplot[name] = {{"min", stats->min},
                             {"q1", stats->q1},
                             {"median", stats->median},
                             {"q3", stats->q3},
                             {"max", stats->max}};
        else
            boxplot[name] = nullptr;
    }
    nlohmann::json j = {{"config", report.config},
                        {"cross_validation", report.cross_validation},
                        {"per_view", per_view},
                        {"aggregate", detail::aggregate_json(report.aggregate)},
                        {"per_fold", per_fold},
                        {"boxplot", boxplot},
                        {"warnings", report.warnings}};
    if (report.elapsed_seconds)
        j["timings"] = {{"total_seconds", *report.elapsed_seconds}};
    return j;
}

inline std::string report_to_csv(EvaluationReport const& report)
{
    std::vector<Metric> metrics;
    if (!report.per_view.empty())
        for (auto const& [m, e] : report.per_view.front().errors)
            metrics.push_back(m);
    std::ostringstream out;
    out << "view_id,fold,completeness";
    for (Metric m : metrics)
        out << ',' << to_string(m);
    out << '\n';
    for (auto const& v : report.per_view) {
        out << v.view_id << ',' << v.fold << ',' << detail::format_double(v.completeness);
        for (Metric m : metrics) {
            out << ',';
            if (auto const& e = v.errors.at(m))
                out << detail::format_double(*e);
        }
        out << '\n';
    }
    return out.str();
}

inline void write_report(EvaluationReport const& report, std::filesystem::path const& dir)
{
    write_text_file(dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_text_file(dir / "report.csv", report_to_csv(report));
}

inline std::filesystem::path error_image_path(std::filesystem::path const& dir,
                                              std::string const& view_id, Metric m)
{
    return dir / (view_id + "_" + std::string(to_string(m)) + ".pfm");
}

}  // namespace rephoto
