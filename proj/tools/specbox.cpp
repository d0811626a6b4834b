// specbox command line: dataset generation, baseline detection, feature
// extraction, evaluation and the three end-to-end experiment sweeps.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "specbox/config.hpp"
#include "specbox/pipeline.hpp"

using namespace specbox;
namespace fs = std::filesystem;

namespace {

fs::path resolve_run_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("SPECBOX_RUN_DIR")) return env;
    return "specbox_run";
}

ExperimentConfig load_experiment(const std::string& config_path) {
    if (config_path.empty()) return ExperimentConfig{};
    return experiment_config_from_json(load_config(config_path));
}

void print_stats(const Manifest& manifest) {
    std::cout << "tasks: executed " << manifest.stats.executed << ", skipped "
              << manifest.stats.skipped << ", failed " << manifest.stats.failed
              << ", blocked " << manifest.stats.blocked << "\n";
}

int cmd_generate(const std::string& config_path, const std::string& run_dir, int workers) {
    const auto cfg = load_experiment(config_path);
    RunOptions opts{resolve_run_dir(run_dir), workers};
    const auto manifest = generate_dataset(cfg, opts);
    print_stats(manifest);
    std::cout << "dataset manifest: " << (opts.run_dir / "dataset.json").string() << "\n";
    return manifest.stats.failed == 0 ? 0 : 1;
}

int cmd_detect(const std::string& matrix_path, const std::string& config_path,
               const std::string& out_path, std::string image_id) {
    const auto cfg = load_experiment(config_path);
    const auto spec = read_matrix(matrix_path);
    if (image_id.empty()) image_id = fs::path(matrix_path).stem().string();
    const auto detections = detect(spec, cfg.detector);
    std::vector<PredictionRecord> records;
    for (const auto& d : detections) records.push_back({image_id, d});
    write_text_file(out_path, export_predictions(records));
    std::cout << records.size() << " detections -> " << out_path << "\n";
    return 0;
}

int cmd_extract(const std::string& predictions_path, const std::string& axes_path,
                const std::string& out_path) {
    const auto axes = read_json_file(axes_path).get<SpectrogramAxes>();
    std::ifstream is(predictions_path);
    if (!is) throw IoError("cannot open: " + predictions_path);
    const auto preds = import_predictions(is);
    for (const auto& why : preds.rejected)
        std::cerr << "rejected: " << why << "\n";

    CsvWriter csv({"image", "row", "class", "confidence", "b_w_hz", "f_c_hz", "fd_s",
                   "frame_count", "mean_fd_s", "cwt_s", "fi_s"});
    const auto& reg = default_registry();
    std::map<std::string, std::vector<BoundingBox>> per_image;
    for (std::size_t i = 0; i < preds.items.size(); ++i) {
        const auto& p = preds.items[i];
        per_image[p.image].push_back(p.det.box);
        const auto f = extract_box_features(p.det.box, axes);
        csv.row({p.image, std::to_string(i), reg.name(p.det.box.cls),
                 std::to_string(p.det.confidence), std::to_string(f.b_w),
                 std::to_string(f.f_c), std::to_string(f.fd), "", "", "", ""});
    }
    for (const auto& [image, boxes] : per_image) {
        const auto set = extract_set_features(boxes, axes);
        csv.row({image, "set", "", "", "", "", "", std::to_string(set.stats.frame_count),
                 std::to_string(set.stats.mean_fd), std::to_string(set.cwt),
                 set.fi ? std::to_string(*set.fi) : ""});
    }
    write_text_file(out_path, csv.str());
    std::cout << preds.items.size() << " boxes -> " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::vector<std::string>& gt_paths, const std::string& predictions_path,
             double iou_threshold, const std::string& out_path) {
    std::ifstream is(predictions_path);
    if (!is) throw IoError("cannot open: " + predictions_path);
    const auto preds = import_predictions(is);

    std::vector<LabeledImage> images;
    std::size_t gt_total = 0, matched_total = 0, correct_total = 0, det_total = 0;
    for (const auto& gt_path : gt_paths) {
        const auto image_id = fs::path(gt_path).stem().string();
        LabeledImage img;
        img.gt = import_voc(read_text_file(gt_path));
        for (const auto& p : preds.items)
            if (p.image == image_id) img.det.push_back(p.det);
        const auto m = match(img.gt, img.det, iou_threshold);
        gt_total += img.gt.size();
        det_total += img.det.size();
        matched_total += m.pairs.size();
        for (const auto& pair : m.pairs)
            if (img.gt[static_cast<std::size_t>(pair.gt)].cls ==
                img.det[static_cast<std::size_t>(pair.det)].box.cls)
                ++correct_total;
        images.push_back(std::move(img));
    }

    std::map<RatClass, std::optional<double>> per_class;
    per_class[RatClass::Lte] = average_precision(images, RatClass::Lte, iou_threshold);
    per_class[RatClass::Wifi] = average_precision(images, RatClass::Wifi, iou_threshold);
    const auto map_value = mean_ap(per_class);

    json report{
        {"images", images.size()},
        {"gt_count", gt_total},
        {"det_count", det_total},
        {"matched", matched_total},
        {"detection_rate",
         gt_total ? static_cast<double>(matched_total) / static_cast<double>(gt_total) : 0.0},
        {"precision", matched_total ? json(static_cast<double>(correct_total) /
                                           static_cast<double>(matched_total))
                                    : json()},
        {"ap", {{"lte", per_class[RatClass::Lte] ? json(*per_class[RatClass::Lte]) : json()},
                {"wifi",
                 per_class[RatClass::Wifi] ? json(*per_class[RatClass::Wifi]) : json()}}},
        {"map", map_value ? json(*map_value) : json()},
        {"iou_threshold", iou_threshold}};
    write_json_file(out_path, report);
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const std::string& kind, const std::string& config_path,
              const std::string& run_dir, int workers, bool prune) {
    const auto cfg = load_experiment(config_path);
    RunOptions opts{resolve_run_dir(run_dir), workers};
    Manifest manifest;
    if (kind == "snr") {
        const auto result = sweep_snr(cfg, opts);
        manifest = result.manifest;
        std::cout << result.csv;
    } else if (kind == "interference") {
        const auto result = sweep_interference(cfg, opts);
        manifest = result.manifest;
        std::cout << result.csv;
    } else {
        const auto result = study_features(cfg, opts);
        manifest = result.manifest;
        std::cout << result.csv;
    }
    print_stats(manifest);
    if (prune) prune_iq_artifacts(opts.run_dir);
    return manifest.stats.failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"labelled RF dataset generation and spectrogram-based RAT evaluation"};
    app.require_subcommand(1);

    std::string config_path, run_dir, out_path, matrix_path, predictions_path, axes_path;
    std::string image_id;
    std::vector<std::string> gt_paths;
    int workers = 2;
    double iou_threshold = 0.5;
    bool prune = false;

    auto* generate = app.add_subcommand("generate", "generate a labelled dataset");
    generate->add_option("--config", config_path, "TOML or JSON config");
    generate->add_option("--run-dir", run_dir, "output directory (or SPECBOX_RUN_DIR)");
    generate->add_option("--workers", workers, "parallel workers");

    auto* det = app.add_subcommand("detect", "run the baseline detector on a spectrogram");
    det->add_option("--matrix", matrix_path, "spectrogram .mat file")->required();
    det->add_option("--config", config_path, "TOML or JSON config");
    det->add_option("--out", out_path, "predictions JSONL output")->required();
    det->add_option("--image-id", image_id, "image id for the JSONL (default: file stem)");

    auto* extract = app.add_subcommand("extract", "extract features from predictions");
    extract->add_option("--predictions", predictions_path, "predictions JSONL")->required();
    extract->add_option("--axes", axes_path, "axes sidecar JSON")->required();
    extract->add_option("--out", out_path, "features CSV output")->required();

    auto* eval = app.add_subcommand("eval", "evaluate predictions against VOC ground truth");
    eval->add_option("--gt", gt_paths, "ground truth VOC XML files")->required();
    eval->add_option("--predictions", predictions_path, "predictions JSONL")->required();
    eval->add_option("--iou", iou_threshold, "IoU matching threshold");
    eval->add_option("--out", out_path, "report JSON output")->required();

    auto* sweep = app.add_subcommand("sweep", "run an end-to-end experiment");
    std::string sweep_kind;
    sweep->add_option("kind", sweep_kind, "snr | interference | features")
        ->required()
        ->check(CLI::IsMember({"snr", "interference", "features"}));
    sweep->add_option("--config", config_path, "TOML or JSON config");
    sweep->add_option("--run-dir", run_dir, "run directory (or SPECBOX_RUN_DIR)");
    sweep->add_option("--workers", workers, "parallel workers");
    sweep->add_flag("--prune-iq", prune, "remove IQ intermediates after aggregation");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(config_path, run_dir, workers);
        if (det->parsed()) return cmd_detect(matrix_path, config_path, out_path, image_id);
        if (extract->parsed()) return cmd_extract(predictions_path, axes_path, out_path);
        if (eval->parsed()) return cmd_eval(gt_paths, predictions_path, iou_threshold, out_path);
        if (sweep->parsed()) return cmd_sweep(sweep_kind, config_path, run_dir, workers, prune);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
