#pragma once

// Dataset generator and experiment runner. Parameter grids expand into
// content-addressed task DAGs (one chain per permutation, common ancestors
// shared); a worker pool executes them topologically with atomic output
// commits, so interrupted runs resume without re-executing finished tasks.
//
// The over-the-air path is a loopback: transmit buffer -> impairments ->
// AWGN + random receive delay -> preamble sync -> aligned capture. A failed
// sync triggers a retransmission with a fresh noise seed (bounded retries).

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <functional>
#include <thread>
#include <vector>

#include "specbox/annotate.hpp"
#include "specbox/channel.hpp"
#include "specbox/common.hpp"
#include "specbox/detect.hpp"
#include "specbox/evalmetrics.hpp"
#include "specbox/features.hpp"
#include "specbox/io.hpp"
#include "specbox/spectro.hpp"
#include "specbox/sync.hpp"
#include "specbox/types.hpp"
#include "specbox/waveforms.hpp"

namespace specbox {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Task graph

enum class TaskKind { Synth, Impair, Record, Spectrogram, Label, Detect, Extract, Eval };

inline const char* task_kind_name(TaskKind k) {
    switch (k) {
    case TaskKind::Synth: return "synth";
    case TaskKind::Impair: return "impair";
    case TaskKind::Record: return "record";
    case TaskKind::Spectrogram: return "spectrogram";
    case TaskKind::Label: return "label";
    case TaskKind::Detect: return "detect";
    case TaskKind::Extract: return "extract";
    case TaskKind::Eval: return "eval";
    }
    return "unknown";
}

struct TaskNode {
    std::string id;
    TaskKind kind;
    json params;
    std::vector<std::string> inputs;
};

inline std::string task_id(TaskKind kind, const json& params,
                           const std::vector<std::string>& inputs) {
    const json j{{"kind", task_kind_name(kind)}, {"params", params}, {"inputs", inputs}};
    return hex64(fnv1a64(j.dump()));
}

class TaskDag {
public:
    // Nodes are stored in insertion order; inputs must already be present, so
    // the stored order is topological and the graph acyclic by construction.
    std::string add(TaskKind kind, json params, std::vector<std::string> inputs = {}) {
        for (const auto& in : inputs)
            if (!index_.count(in)) throw Error("task input not in dag: " + in);
        std::string id = task_id(kind, params, inputs);
        if (index_.count(id)) return id;
        index_.emplace(id, nodes_.size());
        nodes_.push_back(TaskNode{id, kind, std::move(params), std::move(inputs)});
        return id;
    }

    bool contains(const std::string& id) const { return index_.count(id) != 0; }

    const TaskNode& at(const std::string& id) const {
        return nodes_[index_.at(id)];
    }

    const std::vector<TaskNode>& nodes() const { return nodes_; }

    std::vector<std::string> leaves() const {
        std::set<std::string> used;
        for (const auto& n : nodes_)
            for (const auto& in : n.inputs) used.insert(in);
        std::vector<std::string> out;
        for (const auto& n : nodes_)
            if (!used.count(n.id)) out.push_back(n.id);
        return out;
    }

private:
    std::vector<TaskNode> nodes_;
    std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Parameter grids

struct ParameterGrid {
    std::vector<std::pair<std::string, std::vector<json>>> axes;

    void add_axis(const std::string& name, std::vector<json> values) {
        if (values.empty()) throw EmptyAxis("grid axis '" + name + "' has no values");
        axes.emplace_back(name, std::move(values));
    }

    std::size_t expansion_size() const {
        std::size_t n = 1;
        for (const auto& [name, values] : axes) {
            if (values.empty()) throw EmptyAxis("grid axis '" + name + "' has no values");
            n *= values.size();
        }
        return n;
    }

    json permutation(std::size_t index) const {
        json out = json::object();
        for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
            out[it->first] = it->second[index % it->second.size()];
            index /= it->second.size();
        }
        return out;
    }
};

struct TaskTemplate {
    TaskKind kind;
    std::vector<std::string> grid_keys;  // grid axes merged into this task's params
    json fixed = json::object();
};

struct ExpandedDag {
    TaskDag dag;
    // one entry per permutation: (grid values, leaf task id)
    std::vector<std::pair<json, std::string>> leaves;
};

inline ExpandedDag expand(const ParameterGrid& grid, const std::vector<TaskTemplate>& chain) {
    if (chain.empty()) throw InvalidSpec("task chain template is empty");
    std::set<std::string> consumed;
    for (const auto& t : chain)
        for (const auto& k : t.grid_keys) consumed.insert(k);
    for (const auto& [name, values] : grid.axes)
        if (!consumed.count(name))
            throw InvalidSpec("grid axis '" + name + "' not consumed by any task");

    ExpandedDag out;
    const std::size_t total = grid.expansion_size();
    for (std::size_t i = 0; i < total; ++i) {
        const json perm = grid.permutation(i);
        std::vector<std::string> parent;
        for (const auto& tmpl : chain) {
            json params = tmpl.fixed;
            for (const auto& key : tmpl.grid_keys) params[key] = perm.at(key);
            parent = {out.dag.add(tmpl.kind, std::move(params), parent)};
        }
        out.leaves.emplace_back(perm, parent.front());
    }
    if (out.leaves.size() != total)
        throw Error("grid expansion lost permutations");
    return out;
}

// ---------------------------------------------------------------------------
// Runner

struct RunOptions {
    fs::path run_dir;
    int workers = 1;
    // stop dispatching fresh executions after this many (< 0: unlimited);
    // lets tests emulate an interrupted run deterministically
    int max_executed = -1;
};

struct RunStats {
    std::size_t executed = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
    std::size_t blocked = 0;
    std::size_t pending = 0;
};

class TaskExecutor {
public:
    virtual ~TaskExecutor() = default;
    // Write every output into `scratch` under its final basename and return
    // the basenames; the runner moves them into the run dir atomically.
    virtual std::vector<std::string> execute(const TaskNode& node, const TaskDag& dag,
                                             const fs::path& run_dir,
                                             const fs::path& scratch) = 0;
};

struct Manifest {
    struct Entry {
        std::string kind;
        std::string status;  // done | failed | blocked | pending
        std::vector<std::pair<std::string, std::string>> outputs;  // (file, hash)
        std::string error;
    };
    std::map<std::string, Entry> entries;  // keyed (and therefore sorted) by id
    RunStats stats;

    // Artifacts and statuses only; run statistics (executed vs skipped) are
    // runtime information and stay out, so resumed and fresh runs of the same
    // dag serialise identically.
    json to_json() const {
        json items = json::object();
        for (const auto& [id, e] : entries) {
            json outs = json::array();
            for (const auto& [file, hash] : e.outputs)
                outs.push_back({{"file", file}, {"hash", hash}});
            json item{{"kind", e.kind}, {"status", e.status}, {"outputs", outs}};
            if (!e.error.empty()) item["error"] = e.error;
            items[id] = item;
        }
        return json{{"tasks", items}};
    }
};

namespace detail {

inline fs::path marker_path(const fs::path& run_dir, const std::string& id) {
    return run_dir / "done" / (id + ".json");
}

} // namespace detail

inline Manifest run_dag(const TaskDag& dag, TaskExecutor& executor, const RunOptions& opts) {
    fs::create_directories(opts.run_dir);
    fs::create_directories(opts.run_dir / "done");
    fs::create_directories(opts.run_dir / "tmp");

    enum class State { Pending, Done, Failed, Blocked };
    const auto& nodes = dag.nodes();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i].id, i);

    std::vector<State> state(nodes.size(), State::Pending);
    std::vector<int> waiting(nodes.size(), 0);
    std::vector<std::vector<std::size_t>> dependants(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        waiting[i] = static_cast<int>(nodes[i].inputs.size());
        for (const auto& in : nodes[i].inputs)
            dependants[index.at(in)].push_back(i);
    }

    std::mutex mu;
    std::condition_variable cv;
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (waiting[i] == 0) ready.push_back(i);
    std::size_t in_flight = 0;

    Manifest manifest;
    for (const auto& n : nodes) {
        manifest.entries[n.id] = Manifest::Entry{task_kind_name(n.kind), "pending", {}, ""};
    }

    std::function<void(std::size_t, State, const std::string&)> finish =
        [&](std::size_t i, State s, const std::string& error) {
        // caller holds the lock
        state[i] = s;
        auto& entry = manifest.entries[nodes[i].id];
        if (s == State::Done) {
            entry.status = "done";
        } else if (s == State::Failed) {
            entry.status = "failed";
            entry.error = error;
            ++manifest.stats.failed;
        } else {
            entry.status = "blocked";
            ++manifest.stats.blocked;
        }
        for (std::size_t dep : dependants[i]) {
            if (s == State::Done) {
                if (--waiting[dep] == 0 && state[dep] == State::Pending)
                    ready.push_back(dep);
            } else if (state[dep] == State::Pending) {
                // a failed ancestor blocks the chain; siblings are unaffected
                finish(dep, State::Blocked, "");
            }
        }
    };

    auto worker = [&] {
        std::unique_lock lock(mu);
        while (true) {
            cv.wait(lock, [&] { return !ready.empty() || in_flight == 0; });
            if (ready.empty()) {
                if (in_flight == 0) return;
                continue;
            }
            const std::size_t i = ready.back();
            ready.pop_back();
            const TaskNode& node = nodes[i];

            // resume: a completion marker with intact outputs means done
            const auto marker = detail::marker_path(opts.run_dir, node.id);
            bool resumed = false;
            if (fs::exists(marker)) {
                try {
                    const json m = read_json_file(marker);
                    bool ok = true;
                    for (const auto& out : m.at("outputs"))
                        if (!fs::exists(opts.run_dir / out.at("file").get<std::string>()))
                            ok = false;
                    if (ok) {
                        auto& entry = manifest.entries[node.id];
                        for (const auto& out : m.at("outputs"))
                            entry.outputs.emplace_back(out.at("file").get<std::string>(),
                                                       out.at("hash").get<std::string>());
                        ++manifest.stats.skipped;
                        finish(i, State::Done, "");
                        resumed = true;
                    }
                } catch (const Error&) {
                    // damaged marker: re-execute
                }
            }
            if (resumed) {
                cv.notify_all();
                continue;
            }

            if (opts.max_executed >= 0 &&
                manifest.stats.executed >= static_cast<std::size_t>(opts.max_executed)) {
                // execution budget exhausted: leave the task pending
                if (in_flight == 0) cv.notify_all();
                continue;
            }

            ++in_flight;
            ++manifest.stats.executed;
            lock.unlock();

            std::vector<std::pair<std::string, std::string>> committed;
            std::string error;
            const fs::path scratch = opts.run_dir / "tmp" / node.id;
            try {
                fs::create_directories(scratch);
                const auto outputs = executor.execute(node, dag, opts.run_dir, scratch);
                json marker_outputs = json::array();
                for (const auto& name : outputs) {
                    fs::rename(scratch / name, opts.run_dir / name);
                    const auto hash = hex64(hash_file(opts.run_dir / name));
                    committed.emplace_back(name, hash);
                    marker_outputs.push_back({{"file", name}, {"hash", hash}});
                }
                const json m{{"id", node.id},
                             {"kind", task_kind_name(node.kind)},
                             {"outputs", marker_outputs}};
                const fs::path marker_tmp = scratch / "marker.json";
                write_json_file(marker_tmp, m);
                fs::rename(marker_tmp, marker);
            } catch (const std::exception& e) {
                error = e.what();
            }
            std::error_code ec;
            fs::remove_all(scratch, ec);

            lock.lock();
            --in_flight;
            if (error.empty()) {
                manifest.entries[node.id].outputs = std::move(committed);
                finish(i, State::Done, "");
            } else {
                finish(i, State::Failed, error);
            }
            cv.notify_all();
        }
    };

    const int n_workers = std::max(1, opts.workers);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (state[i] == State::Pending) ++manifest.stats.pending;

    const json mj = manifest.to_json();
    const fs::path tmp = opts.run_dir / "tmp" / "manifest.json";
    fs::create_directories(opts.run_dir / "tmp");
    write_json_file(tmp, mj);
    fs::rename(tmp, opts.run_dir / "manifest.json");
    return manifest;
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct ExperimentConfig {
    double sample_rate = 20e6;
    double span = 50e-3;  // visible capture span per image

    StftParams stft;
    PreambleConfig preamble;
    double preamble_boost_db = 10.0;  // preamble power above the frames
    int preamble_reserve = 2048;      // samples from tx start to data start
    int max_delay = 2000;             // random receive delay (samples)
    double sync_threshold = kDefaultSyncThreshold;
    int max_sync_retries = 3;

    DetectorConfig detector;
    std::string predictions_dir;  // when set, evaluate imported predictions

    std::uint64_t seed = 1;
    double iou_threshold = 0.5;

    // per-class frame parameter pools for generated schedules
    std::vector<double> lte_fd_s{4e-3, 8e-3};
    std::vector<double> lte_bw_hz{10e6};
    std::vector<double> wifi_fd_s{1e-3, 2e-3};
    std::vector<double> wifi_bw_hz{20e6};
    double min_gap_s = 2e-3;
    double max_gap_s = 5e-3;

    // snr sweep
    std::vector<double> snr_points_db{-13, -3, 12, 29, 35};
    int images_per_point = 20;

    // interference sweep
    std::vector<double> interference_snr_db{3, 9, 15, 21, 29, 35};
    double desired_snr_db = 29.0;
    int interference_images_per_point = 12;

    // feature-deviation study. Durations sit near whole spectrogram rows
    // (I_t = 519.2 us) apart from the 2 ms point, which keeps the small-FD
    // quantisation behaviour visible in the per-group statistics.
    std::vector<double> study_bw_hz{5e6, 10e6, 15e6, 20e6};
    std::vector<double> study_fd_s{2e-3, 4.15e-3, 8.31e-3};
    std::vector<double> study_fi_s{2e-3, 4e-3, 6e-3};
    int study_images_per_point = 6;
    double study_snr_db = 29.0;

    // dataset generation (CLI `generate`)
    std::vector<double> dataset_snr_db{12, 29};
    int dataset_images_per_point = 10;

    double data_start_s() const {
        return static_cast<double>(preamble_reserve) / sample_rate;
    }
    double tx_span_s() const { return data_start_s() + span; }

    // Sub-configs folded into task params so content addressing covers every
    // input that shapes a task's output.
    json synth_config_json() const {
        return json{{"seed", seed},
                    {"sample_rate", sample_rate},
                    {"span", span},
                    {"reserve", preamble_reserve},
                    {"boost_db", preamble_boost_db},
                    {"preamble", preamble_json()},
                    {"lte_fd_s", lte_fd_s},
                    {"lte_bw_hz", lte_bw_hz},
                    {"wifi_fd_s", wifi_fd_s},
                    {"wifi_bw_hz", wifi_bw_hz},
                    {"min_gap_s", min_gap_s},
                    {"max_gap_s", max_gap_s}};
    }
    json record_config_json() const {
        return json{{"seed", seed},
                    {"span", span},
                    {"reserve", preamble_reserve},
                    {"max_delay", max_delay},
                    {"sync_threshold", sync_threshold},
                    {"max_retries", max_sync_retries},
                    {"preamble", preamble_json()}};
    }
    json detector_config_json() const {
        json rules = json::array();
        for (const auto& r : detector.rules) {
            json jr{{"class", default_registry().name(r.cls)}};
            if (r.fd_min_s) jr["fd_min_s"] = *r.fd_min_s;
            if (r.fd_max_s) jr["fd_max_s"] = *r.fd_max_s;
            if (r.bw_min_hz) jr["bw_min_hz"] = *r.bw_min_hz;
            if (r.bw_max_hz) jr["bw_max_hz"] = *r.bw_max_hz;
            rules.push_back(jr);
        }
        return json{{"threshold_db", detector.threshold_db_above_floor},
                    {"min_box_area", detector.min_box_area},
                    {"merge_gap", detector.merge_gap},
                    {"projection_rescue", detector.projection_rescue},
                    {"refine_edges", detector.refine_edges},
                    {"rules", rules},
                    {"mode", predictions_dir.empty() ? "baseline" : "import"},
                    {"predictions_dir", predictions_dir}};
    }
    json preamble_json() const {
        return json{{"n_short", preamble.n_short},
                    {"len_short", preamble.len_short},
                    {"root_short", preamble.root_short},
                    {"len_long", preamble.len_long},
                    {"root_long", preamble.root_long},
                    {"total_length", preamble.total_length}};
    }
};

inline ExperimentConfig experiment_config_from_json(const json& cfg) {
    ExperimentConfig out;
    auto get = [&](const char* section, const char* key, auto fallback) {
        using T = decltype(fallback);
        if (cfg.contains(section) && cfg.at(section).contains(key))
            return cfg.at(section).at(key).get<T>();
        return fallback;
    };
    out.sample_rate = get("band", "sample_rate", out.sample_rate);
    out.span = get("band", "span", out.span);
    out.stft.fft_size = get("stft", "fft_size", out.stft.fft_size);
    out.stft.hop = get("stft", "hop", out.stft.hop);
    out.preamble.n_short = get("preamble", "n_short", out.preamble.n_short);
    out.preamble.len_short = get("preamble", "len_short", out.preamble.len_short);
    out.preamble.root_short = get("preamble", "root_short", out.preamble.root_short);
    out.preamble.len_long = get("preamble", "len_long", out.preamble.len_long);
    out.preamble.root_long = get("preamble", "root_long", out.preamble.root_long);
    out.preamble.total_length = get("preamble", "total_length", out.preamble.total_length);
    out.preamble_boost_db = get("preamble", "boost_db", out.preamble_boost_db);
    out.preamble_reserve = get("preamble", "reserve", out.preamble_reserve);
    out.sync_threshold = get("preamble", "threshold", out.sync_threshold);
    out.max_sync_retries = get("preamble", "max_retries", out.max_sync_retries);
    out.max_delay = get("channel", "max_delay", out.max_delay);
    out.detector.threshold_db_above_floor =
        get("detector", "threshold_db", out.detector.threshold_db_above_floor);
    out.detector.min_box_area = get("detector", "min_box_area", out.detector.min_box_area);
    out.detector.merge_gap = get("detector", "merge_gap", out.detector.merge_gap);
    out.detector.projection_rescue =
        get("detector", "projection_rescue", out.detector.projection_rescue);
    out.detector.refine_edges = get("detector", "refine_edges", out.detector.refine_edges);
    const double cut_ms = get("detector", "lte_min_fd_ms", 2.5);
    out.detector.rules = default_classifier_rules();
    out.detector.rules[0].fd_min_s = cut_ms * 1e-3;
    out.detector.rules[1].fd_max_s = cut_ms * 1e-3;
    out.predictions_dir = get("detector", "predictions_dir", std::string{});
    out.seed = static_cast<std::uint64_t>(get("run", "seed", 1));
    out.iou_threshold = get("eval", "iou_threshold", out.iou_threshold);
    out.lte_fd_s = get("frames", "lte_fd_s", out.lte_fd_s);
    out.lte_bw_hz = get("frames", "lte_bw_hz", out.lte_bw_hz);
    out.wifi_fd_s = get("frames", "wifi_fd_s", out.wifi_fd_s);
    out.wifi_bw_hz = get("frames", "wifi_bw_hz", out.wifi_bw_hz);
    out.min_gap_s = get("frames", "min_gap_s", out.min_gap_s);
    out.max_gap_s = get("frames", "max_gap_s", out.max_gap_s);
    out.snr_points_db = get("sweep_snr", "points_db", out.snr_points_db);
    out.images_per_point = get("sweep_snr", "images_per_point", out.images_per_point);
    out.interference_snr_db = get("interference", "points_db", out.interference_snr_db);
    out.desired_snr_db = get("interference", "desired_snr_db", out.desired_snr_db);
    out.interference_images_per_point =
        get("interference", "images_per_point", out.interference_images_per_point);
    out.study_bw_hz = get("features", "bw_hz", out.study_bw_hz);
    out.study_fd_s = get("features", "fd_s", out.study_fd_s);
    out.study_fi_s = get("features", "fi_s", out.study_fi_s);
    out.study_images_per_point = get("features", "images_per_point", out.study_images_per_point);
    out.study_snr_db = get("features", "snr_db", out.study_snr_db);
    out.dataset_snr_db = get("dataset", "snr_db", out.dataset_snr_db);
    out.dataset_images_per_point =
        get("dataset", "images_per_point", out.dataset_images_per_point);
    return out;
}

// ---------------------------------------------------------------------------
// Schedule generation for the experiment kinds

namespace detail {

inline double pick(Rng& rng, const std::vector<double>& values) {
    return values[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(values.size()) - 1))];
}

// random centre frequency on a 0.5 MHz grid that keeps the frame in band
inline double pick_center(Rng& rng, double bw, double band) {
    const double step = 0.5e6;
    const auto lo = static_cast<std::int64_t>(std::ceil(bw / 2.0 / step));
    const auto hi = static_cast<std::int64_t>(std::floor((band - bw / 2.0) / step));
    if (hi <= lo) return band / 2.0;
    return static_cast<double>(rng.uniform_int(lo, hi)) * step;
}

// frames of alternating class, non-overlapping in time
inline TransmissionSchedule mixed_schedule(const ExperimentConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    TransmissionSchedule sched;
    sched.band_width = cfg.sample_rate;
    sched.sample_rate = cfg.sample_rate;
    sched.span = cfg.tx_span_s();
    double t = cfg.data_start_s() + rng.uniform(0.0, cfg.max_gap_s);
    bool lte = rng.uniform() < 0.5;
    std::uint64_t frame_seed = mix_seed(seed, 0x5eed);
    while (true) {
        FrameSpec f;
        f.cls = lte ? RatClass::Lte : RatClass::Wifi;
        f.duration = pick(rng, lte ? cfg.lte_fd_s : cfg.wifi_fd_s);
        f.bandwidth = pick(rng, lte ? cfg.lte_bw_hz : cfg.wifi_bw_hz);
        f.f_center = pick_center(rng, f.bandwidth, sched.band_width);
        f.t_start = t;
        f.power_db = 0.0;
        f.seed = frame_seed = mix_seed(frame_seed, 1);
        if (f.t_start + f.duration > sched.span - 1e-4) break;
        sched.frames.push_back(f);
        t += f.duration + rng.uniform(cfg.min_gap_s, cfg.max_gap_s);
        lte = !lte;
    }
    return sched;
}

// desired LTE frames, each overlapped by a co-channel WiFi burst whose power
// sets the interferer SNR relative to the desired signal
inline TransmissionSchedule interference_schedule(const ExperimentConfig& cfg,
                                                  std::uint64_t seed,
                                                  double interferer_rel_db) {
    Rng rng(seed);
    TransmissionSchedule sched;
    sched.band_width = cfg.sample_rate;
    sched.sample_rate = cfg.sample_rate;
    sched.span = cfg.tx_span_s();
    const double bw = 20e6;
    const double fc = sched.band_width / 2.0;
    double t = cfg.data_start_s() + rng.uniform(1e-3, 3e-3);
    std::uint64_t frame_seed = mix_seed(seed, 0xcafe);
    while (true) {
        FrameSpec lte;
        lte.cls = RatClass::Lte;
        lte.duration = pick(rng, cfg.lte_fd_s);
        lte.bandwidth = bw;
        lte.f_center = fc;
        lte.t_start = t;
        lte.power_db = 0.0;
        lte.seed = frame_seed = mix_seed(frame_seed, 1);
        if (lte.t_start + lte.duration > sched.span - 1e-4) break;
        sched.frames.push_back(lte);

        FrameSpec wifi;
        wifi.cls = RatClass::Wifi;
        wifi.duration = pick(rng, cfg.wifi_fd_s);
        wifi.bandwidth = bw;
        wifi.f_center = fc;
        const double max_off = std::max(lte.duration - wifi.duration, 0.0);
        wifi.t_start = lte.t_start + rng.uniform(0.0, max_off);
        wifi.power_db = interferer_rel_db;
        wifi.seed = frame_seed = mix_seed(frame_seed, 2);
        if (wifi.t_start + wifi.duration <= sched.span)
            sched.frames.push_back(wifi);

        t += lte.duration + rng.uniform(cfg.min_gap_s, cfg.max_gap_s);
    }
    return sched;
}

// single-parameter frames for the feature study: duration fd, spacing fi
inline TransmissionSchedule study_schedule(const ExperimentConfig& cfg, std::uint64_t seed,
                                           double bw, double fd, double fi) {
    Rng rng(seed);
    TransmissionSchedule sched;
    sched.band_width = cfg.sample_rate;
    sched.sample_rate = cfg.sample_rate;
    sched.span = cfg.tx_span_s();
    const bool lte = (seed & 1) == 0;
    const double fc = pick_center(rng, bw, sched.band_width);
    double t = cfg.data_start_s() + rng.uniform(0.0, fi);
    std::uint64_t frame_seed = mix_seed(seed, 0xfeed);
    while (t + fd <= sched.span - 1e-4) {
        FrameSpec f;
        f.cls = lte ? RatClass::Lte : RatClass::Wifi;
        f.duration = fd;
        f.bandwidth = bw;
        f.f_center = fc;
        f.t_start = t;
        f.power_db = 0.0;
        f.seed = frame_seed = mix_seed(frame_seed, 1);
        sched.frames.push_back(f);
        t += fd + fi;
    }
    return sched;
}

} // namespace detail

// ---------------------------------------------------------------------------
// The loopback experiment executor

class ExperimentExecutor : public TaskExecutor {
public:
    explicit ExperimentExecutor(ExperimentConfig cfg) : cfg_(std::move(cfg)) {}

    std::vector<std::string> execute(const TaskNode& node, const TaskDag& dag,
                                     const fs::path& run_dir,
                                     const fs::path& scratch) override {
        switch (node.kind) {
        case TaskKind::Synth: return run_synth(node, scratch);
        case TaskKind::Impair: return run_impair(node, dag, run_dir, scratch);
        case TaskKind::Record: return run_record(node, dag, run_dir, scratch);
        case TaskKind::Spectrogram: return run_spectrogram(node, dag, run_dir, scratch);
        case TaskKind::Label: return run_label(node, dag, run_dir, scratch);
        case TaskKind::Detect: return run_detect(node, dag, run_dir, scratch);
        case TaskKind::Extract: return run_extract(node, dag, run_dir, scratch);
        case TaskKind::Eval: return run_eval(node, dag, run_dir, scratch);
        }
        throw Error("unknown task kind");
    }

    TransmissionSchedule schedule_for(const json& params) const {
        const auto kind = params.at("schedule").get<std::string>();
        const auto image = params.at("image").get<std::uint64_t>();
        const std::uint64_t seed = mix_seed(cfg_.seed, fnv1a64(kind) ^ image);
        if (kind == "mixed") return detail::mixed_schedule(cfg_, seed);
        if (kind == "interference")
            return detail::interference_schedule(cfg_, seed,
                                                 params.at("interferer_rel_db").get<double>());
        if (kind == "study")
            return detail::study_schedule(cfg_, seed, params.at("bw_hz").get<double>(),
                                          params.at("fd_s").get<double>(),
                                          params.at("fi_s").get<double>());
        throw Error("unknown schedule kind: " + kind);
    }

private:
    fs::path input_file(const TaskDag& dag, const fs::path& run_dir,
                        const std::string& id, const char* ext) const {
        (void)dag;
        return run_dir / (id + ext);
    }

    std::vector<std::string> run_synth(const TaskNode& node, const fs::path& scratch) {
        const auto sched = schedule_for(node.params);
        IQRecord rec = render_schedule(sched);

        // boosted preamble ahead of the data region
        const auto preamble = build_preamble(cfg_.preamble);
        const double boost = db_to_amplitude(cfg_.preamble_boost_db);
        if (preamble.size() + 16 > static_cast<std::size_t>(cfg_.preamble_reserve))
            throw InvalidSpec("preamble_reserve smaller than the preamble");
        for (std::size_t i = 0; i < preamble.size(); ++i)
            rec.samples[i] = static_cast<cfloat>(preamble[i] * boost);

        rec.meta["preamble_reserve"] = cfg_.preamble_reserve;
        rec.meta["preamble_boost_db"] = cfg_.preamble_boost_db;
        write_iq(scratch / (node.id + ".iq"), rec);
        return {node.id + ".iq", node.id + ".meta.json"};
    }

    std::vector<std::string> run_impair(const TaskNode& node, const TaskDag& dag,
                                        const fs::path& run_dir, const fs::path& scratch) {
        const auto rec = read_iq(input_file(dag, run_dir, node.inputs.at(0), ".iq"));
        const auto chain = ImpairmentChain::from_json(node.params.at("chain"));
        const auto out = chain.apply(rec);
        write_iq(scratch / (node.id + ".iq"), out);
        return {node.id + ".iq", node.id + ".meta.json"};
    }

    // Loopback receive: random delay, AWGN, preamble sync, aligned slice.
    // A failed sync retransmits with a fresh noise seed up to max_sync_retries.
    std::vector<std::string> run_record(const TaskNode& node, const TaskDag& dag,
                                        const fs::path& run_dir, const fs::path& scratch) {
        const auto tx = read_iq(input_file(dag, run_dir, node.inputs.at(0), ".iq"));
        const std::uint64_t base_seed =
            mix_seed(cfg_.seed, fnv1a64(node.params.dump()) ^ 0x7ec0ecULL);

        Rng delay_rng(mix_seed(base_seed, 0xde1a));
        const auto delay = static_cast<std::size_t>(
            cfg_.max_delay > 0 ? delay_rng.uniform_int(0, cfg_.max_delay) : 0);

        IQRecord rx0;
        rx0.sample_rate = tx.sample_rate;
        rx0.samples.assign(delay, cfloat{0.0f, 0.0f});
        rx0.samples.insert(rx0.samples.end(), tx.samples.begin(), tx.samples.end());
        rx0.samples.resize(rx0.samples.size() + 64, cfloat{0.0f, 0.0f});

        std::optional<double> snr;
        if (node.params.contains("snr_db") && !node.params.at("snr_db").is_null())
            snr = node.params.at("snr_db").get<double>();
        std::optional<double> noise_ref_db;
        if (node.params.contains("noise_ref_db"))
            noise_ref_db = node.params.at("noise_ref_db").get<double>();

        SyncResult sync;
        IQRecord rx;
        int attempt = 0;
        for (;; ++attempt) {
            if (attempt > cfg_.max_sync_retries)
                throw Error("preamble sync failed after " +
                            std::to_string(cfg_.max_sync_retries) + " retransmissions");
            rx = rx0;
            if (snr) {
                const std::uint64_t noise_seed = mix_seed(base_seed, 100 + attempt);
                if (noise_ref_db) {
                    // calibrate against a stated reference power instead of the
                    // record's occupied-sample mean (mixed-power schedules)
                    const double noise_power = db_to_power(*noise_ref_db - *snr);
                    Rng rng(noise_seed);
                    for (auto& v : rx.samples)
                        v = static_cast<cfloat>(static_cast<cdouble>(v) +
                                                rng.complex_normal() *
                                                    std::sqrt(noise_power));
                } else {
                    rx = apply_awgn(rx, *snr, noise_seed);
                }
            }
            sync = detect_preamble(rx, cfg_.preamble, cfg_.sync_threshold);
            if (sync.detected) break;
        }

        const auto n_span = static_cast<std::size_t>(std::llround(cfg_.span * tx.sample_rate));
        const std::size_t start = sync.t_offset + static_cast<std::size_t>(cfg_.preamble_reserve);
        if (start + n_span > rx.samples.size())
            throw Error("aligned capture exceeds the received buffer");

        IQRecord aligned;
        aligned.sample_rate = rx.sample_rate;
        aligned.samples.assign(rx.samples.begin() + static_cast<std::ptrdiff_t>(start),
                               rx.samples.begin() + static_cast<std::ptrdiff_t>(start + n_span));
        aligned.meta = tx.meta;
        aligned.meta["sync"] = json(sync);
        aligned.meta["delay"] = delay;
        aligned.meta["attempt"] = attempt;
        if (snr) aligned.meta["snr_db"] = *snr;
        write_iq(scratch / (node.id + ".iq"), aligned);
        return {node.id + ".iq", node.id + ".meta.json"};
    }

    std::vector<std::string> run_spectrogram(const TaskNode& node, const TaskDag& dag,
                                             const fs::path& run_dir,
                                             const fs::path& scratch) {
        const auto rec = read_iq(input_file(dag, run_dir, node.inputs.at(0), ".iq"));
        StftParams params;
        params.fft_size = node.params.at("fft_size").get<int>();
        params.hop = node.params.at("hop").get<int>();
        auto spec = compute_spectrogram(rec, params);
        spec.meta["source"] = node.inputs.at(0);
        write_matrix(scratch / (node.id + ".mat"), spec);

        // cosmetic grayscale export, scaled between the floor and the peak
        const double floor_db = estimate_noise_floor(spec);
        float peak = spec.power_db.empty() ? 0.0f : spec.power_db[0];
        for (float v : spec.power_db) peak = std::max(peak, v);
        const double ceil_db = std::max(static_cast<double>(peak), floor_db + 1.0);
        write_pgm(scratch / (node.id + ".pgm"), to_image(spec, floor_db, ceil_db));
        return {node.id + ".mat", node.id + ".axes.json", node.id + ".pgm"};
    }

    std::vector<std::string> run_label(const TaskNode& node, const TaskDag& dag,
                                       const fs::path& run_dir, const fs::path& scratch) {
        const auto& record_id = node.inputs.at(0);
        const auto& spec_id = node.inputs.at(1);
        const auto meta =
            read_json_file(run_dir / (record_id + ".meta.json"));
        const auto sched = meta.at("schedule").get<TransmissionSchedule>();
        const auto axes =
            read_json_file(run_dir / (spec_id + ".axes.json")).get<SpectrogramAxes>();

        // the aligned capture starts at the data region: shift by -reserve
        const double shift =
            -static_cast<double>(meta.at("preamble_reserve").get<int>()) / sched.sample_rate;
        const auto gt = ground_truth_boxes(sched, axes, shift);

        const auto xml = export_voc({spec_id + ".pgm", axes.width(), axes.height()}, gt.boxes);
        write_text_file(scratch / (node.id + ".xml"), xml);

        json info{{"dropped", gt.dropped},
                  {"schedule_hash", meta.at("schedule_hash")},
                  {"sync", meta.at("sync")}};
        write_json_file(scratch / (node.id + ".label.json"), info);
        return {node.id + ".xml", node.id + ".label.json"};
    }

    std::vector<std::string> run_detect(const TaskNode& node, const TaskDag& dag,
                                        const fs::path& run_dir, const fs::path& scratch) {
        const auto& spec_id = node.inputs.at(0);
        std::vector<PredictionRecord> records;
        if (!cfg_.predictions_dir.empty()) {
            // imported predictions from an external model, keyed by image id
            const fs::path src = fs::path(cfg_.predictions_dir) / (spec_id + ".jsonl");
            std::ifstream is(src);
            if (!is) throw IoError("missing imported predictions: " + src.string());
            const auto imported = import_predictions(is);
            records = imported.items;
            for (auto& r : records) r.image = spec_id;
        } else {
            const auto spec = read_matrix(input_file(dag, run_dir, spec_id, ".mat"));
            const auto detections = specbox::detect(spec, cfg_.detector);
            for (const auto& d : detections) records.push_back({spec_id, d});
        }
        write_text_file(scratch / (node.id + ".jsonl"), export_predictions(records));
        return {node.id + ".jsonl"};
    }

    std::vector<std::string> run_extract(const TaskNode& node, const TaskDag& dag,
                                         const fs::path& run_dir, const fs::path& scratch) {
        const auto& detect_id = node.inputs.at(0);
        const auto& spec_id = node.inputs.at(1);
        const auto axes =
            read_json_file(run_dir / (spec_id + ".axes.json")).get<SpectrogramAxes>();
        std::ifstream is(run_dir / (detect_id + ".jsonl"));
        const auto preds = import_predictions(is);

        CsvWriter csv({"image", "row", "class", "confidence", "b_w_hz", "f_c_hz", "fd_s",
                       "frame_count", "mean_fd_s", "cwt_s", "fi_s"});
        std::vector<BoundingBox> boxes;
        const auto& reg = default_registry();
        for (std::size_t i = 0; i < preds.items.size(); ++i) {
            const auto& p = preds.items[i];
            boxes.push_back(p.det.box);
            const auto f = extract_box_features(p.det.box, axes);
            csv.row({p.image, std::to_string(i), reg.name(p.det.box.cls),
                     std::to_string(p.det.confidence), std::to_string(f.b_w),
                     std::to_string(f.f_c), std::to_string(f.fd), "", "", "", ""});
        }
        const auto set = extract_set_features(boxes, axes);
        csv.row({spec_id, "set", "", "", "", "", "", std::to_string(set.stats.frame_count),
                 std::to_string(set.stats.mean_fd), std::to_string(set.cwt),
                 set.fi ? std::to_string(*set.fi) : ""});
        write_text_file(scratch / (node.id + ".csv"), csv.str());
        return {node.id + ".csv"};
    }

    std::vector<std::string> run_eval(const TaskNode& node, const TaskDag& dag,
                                      const fs::path& run_dir, const fs::path& scratch) {
        const auto& label_id = node.inputs.at(0);
        const auto& detect_id = node.inputs.at(1);
        const auto& spec_id = node.inputs.at(2);
        (void)dag;

        auto gt = import_voc(read_text_file(run_dir / (label_id + ".xml")));
        std::ifstream is(run_dir / (detect_id + ".jsonl"));
        const auto preds = import_predictions(is);
        std::vector<Detection> det;
        for (const auto& p : preds.items) det.push_back(p.det);
        const auto axes =
            read_json_file(run_dir / (spec_id + ".axes.json")).get<SpectrogramAxes>();

        // optionally score only one ground-truth class (interference studies)
        std::optional<RatClass> gt_class;
        if (node.params.contains("gt_class")) {
            const auto parsed =
                default_registry().parse(node.params.at("gt_class").get<std::string>());
            if (parsed) gt_class = *parsed;
            std::erase_if(gt, [&](const BoundingBox& b) { return b.cls != *gt_class; });
        }

        const double iou_thr = node.params.value("iou_threshold", cfg_.iou_threshold);
        const auto m = match(gt, det, iou_thr);
        const auto rp = detection_and_precision(m, gt, det);

        // deviations of matched detections against the schedule's ground truth
        json deviations{{"b_w_pct", json::array()},
                        {"f_c_pct", json::array()},
                        {"fd_pct", json::array()}};
        json fi_dev;
        if (node.params.value("deviations", false)) {
            const auto sched_meta = read_json_file(
                run_dir / (node.params.at("record_id").get<std::string>() + ".meta.json"));
            const auto sched = sched_meta.at("schedule").get<TransmissionSchedule>();
            const double shift =
                -static_cast<double>(sched_meta.at("preamble_reserve").get<int>()) /
                sched.sample_rate;

            // visible frames in label order (ground_truth_boxes preserves order)
            std::vector<FrameSpec> visible;
            for (const auto& fr : sched.frames) {
                TransmissionSchedule one = sched;
                one.frames = {fr};
                if (!ground_truth_boxes(one, axes, shift).boxes.empty())
                    visible.push_back(fr);
            }
            if (visible.size() == gt.size()) {
                for (const auto& pair : m.pairs) {
                    const auto& truth = visible[static_cast<std::size_t>(pair.gt)];
                    const auto f =
                        extract_box_features(det[static_cast<std::size_t>(pair.det)].box, axes);
                    const auto d = feature_deviation(f, truth, sched.band_width);
                    deviations["b_w_pct"].push_back(d.b_w.pct);
                    deviations["f_c_pct"].push_back(d.f_c.pct);
                    deviations["fd_pct"].push_back(d.fd.pct);
                }
                // inter-frame duration from all detections vs visible truth
                std::vector<BoundingBox> det_boxes;
                for (const auto& d : det) det_boxes.push_back(d.box);
                const auto set = extract_set_features(det_boxes, axes);
                double truth_fd = 0.0;
                for (const auto& fr : visible) truth_fd += fr.duration;
                const double span = axes.t2 - axes.t1;
                const double truth_cwt =
                    std::max(span - truth_fd, 0.0);
                if (!visible.empty() && set.fi) {
                    const double truth_fi = truth_cwt / static_cast<double>(visible.size());
                    if (truth_fi > 0.0)
                        fi_dev = std::abs(*set.fi - truth_fi) / truth_fi * 100.0;
                }
            }
        }

        json report{{"gt_count", gt.size()},
                    {"det_count", det.size()},
                    {"matched", m.pairs.size()},
                    {"detection_rate", rp.detection_rate},
                    {"precision", rp.precision ? json(*rp.precision) : json()},
                    {"deviations", deviations},
                    {"fi_pct", fi_dev},
                    {"iou_threshold", iou_thr}};
        write_json_file(scratch / (node.id + ".eval.json"), report);
        return {node.id + ".eval.json"};
    }

    ExperimentConfig cfg_;
};

// ---------------------------------------------------------------------------
// Experiment drivers

namespace detail {

inline std::vector<json> to_json_values(const std::vector<double>& v) {
    std::vector<json> out;
    out.reserve(v.size());
    for (double x : v) out.push_back(x);
    return out;
}

inline std::vector<json> index_values(int n) {
    std::vector<json> out;
    for (int i = 0; i < n; ++i) out.push_back(i);
    return out;
}

} // namespace detail

struct SweepResult {
    std::string csv;
    Manifest manifest;
};

// Generic grid sweep: builds the task graph, runs it and aggregates the
// per-image eval reports of each grid point.
inline SweepResult run_point_sweep(const ExperimentConfig& cfg, const RunOptions& opts,
                                   const std::string& schedule_kind,
                                   const std::string& axis_name,
                                   const std::vector<double>& axis_values,
                                   int images_per_point, const json& synth_extra,
                                   const json& record_extra, const json& eval_extra,
                                   const std::string& csv_header_axis) {
    ParameterGrid grid;
    grid.add_axis(axis_name, detail::to_json_values(axis_values));
    grid.add_axis("image", detail::index_values(images_per_point));

    TaskDag dag;
    std::map<double, std::vector<std::string>> point_evals;
    for (const auto& axis_value : axis_values) {
        for (int image = 0; image < images_per_point; ++image) {
            json synth_params = synth_extra;
            synth_params["schedule"] = schedule_kind;
            synth_params["image"] = image;
            synth_params["cfg"] = cfg.synth_config_json();
            if (synth_extra.value("axis_in_schedule", false)) {
                synth_params.erase("axis_in_schedule");
                synth_params[axis_name] = axis_value;
            }
            const auto synth = dag.add(TaskKind::Synth, synth_params);

            json record_params = record_extra;
            record_params[axis_name] = axis_value;
            record_params["image"] = image;
            record_params["cfg"] = cfg.record_config_json();
            const auto record = dag.add(TaskKind::Record, record_params, {synth});

            const auto spec = dag.add(
                TaskKind::Spectrogram,
                json{{"fft_size", cfg.stft.fft_size}, {"hop", cfg.stft.hop}}, {record});
            const auto label = dag.add(TaskKind::Label, json::object(), {record, spec});
            const auto detect = dag.add(
                TaskKind::Detect, json{{"cfg", cfg.detector_config_json()}}, {spec});
            dag.add(TaskKind::Extract, json::object(), {detect, spec});

            json eval_params = eval_extra;
            eval_params["record_id"] = record;
            eval_params["iou_threshold"] = cfg.iou_threshold;
            const auto eval =
                dag.add(TaskKind::Eval, eval_params, {label, detect, spec});
            point_evals[axis_value].push_back(eval);
        }
    }

    ExperimentExecutor executor(cfg);
    SweepResult result;
    result.manifest = run_dag(dag, executor, opts);

    CsvWriter csv({csv_header_axis, "detection_rate", "precision", "images", "gt_frames"});
    for (const auto& axis_value : axis_values) {
        std::size_t gt = 0, matched = 0, correct = 0;
        std::size_t images_done = 0;
        for (const auto& id : point_evals[axis_value]) {
            const auto it = result.manifest.entries.find(id);
            if (it == result.manifest.entries.end() || it->second.status != "done") continue;
            const auto report = read_json_file(opts.run_dir / (id + ".eval.json"));
            gt += report.at("gt_count").get<std::size_t>();
            matched += report.at("matched").get<std::size_t>();
            if (!report.at("precision").is_null()) {
                const auto m = report.at("matched").get<std::size_t>();
                correct += static_cast<std::size_t>(
                    std::llround(report.at("precision").get<double>() *
                                 static_cast<double>(m)));
            }
            ++images_done;
        }
        const double rate = gt ? static_cast<double>(matched) / static_cast<double>(gt) : 0.0;
        const std::string precision =
            matched ? std::to_string(static_cast<double>(correct) /
                                     static_cast<double>(matched))
                    : "";
        csv.row({std::to_string(axis_value), std::to_string(rate), precision,
                 std::to_string(images_done), std::to_string(gt)});
    }
    result.csv = csv.str();
    return result;
}

// SNR sweep (detection rate and precision vs SNR).
inline SweepResult sweep_snr(const ExperimentConfig& cfg, const RunOptions& opts) {
    auto result = run_point_sweep(cfg, opts, "mixed", "snr_db", cfg.snr_points_db,
                                  cfg.images_per_point, json{{"seed_tag", "snr"}},
                                  json::object(), json::object(), "snr_db");
    write_text_file(opts.run_dir / "snr_sweep.csv", result.csv);
    return result;
}

// Interference sweep: desired LTE at a fixed SNR, co-channel WiFi interferer
// swept over its own SNR. Detection rate is scored on the LTE ground truth.
inline SweepResult sweep_interference(const ExperimentConfig& cfg, const RunOptions& opts) {
    std::vector<double> rel_values;
    for (double v : cfg.interference_snr_db) rel_values.push_back(v - cfg.desired_snr_db);

    json synth_extra{{"seed_tag", "interference"}, {"axis_in_schedule", true}};
    json record_extra{{"snr_db", cfg.desired_snr_db}, {"noise_ref_db", 0.0}};
    json eval_extra{{"gt_class", "lte"}};
    auto result = run_point_sweep(cfg, opts, "interference", "interferer_rel_db", rel_values,
                                  cfg.interference_images_per_point, synth_extra,
                                  record_extra, eval_extra, "interferer_rel_db");

    // re-express the axis as the interferer's absolute SNR
    std::string out = "interferer_snr_db,detection_rate,precision,images,gt_frames\n";
    std::istringstream is(result.csv);
    std::string line;
    std::getline(is, line);  // header
    std::size_t row = 0;
    while (std::getline(is, line) && row < cfg.interference_snr_db.size()) {
        const auto comma = line.find(',');
        out += std::to_string(cfg.interference_snr_db[row]) + line.substr(comma) + "\n";
        ++row;
    }
    result.csv = out;
    write_text_file(opts.run_dir / "interference_sweep.csv", result.csv);
    return result;
}

// Feature-deviation study at a fixed SNR over a (bandwidth, duration,
// inter-frame duration) grid; emits boxplot statistics per feature.
struct StudyResult {
    std::string csv;
    Manifest manifest;
    std::map<std::string, std::vector<double>> overall;  // feature -> deviations
};

inline StudyResult study_features(const ExperimentConfig& cfg, const RunOptions& opts) {
    ParameterGrid grid;
    grid.add_axis("bw_hz", detail::to_json_values(cfg.study_bw_hz));
    grid.add_axis("fd_s", detail::to_json_values(cfg.study_fd_s));
    grid.add_axis("fi_s", detail::to_json_values(cfg.study_fi_s));
    grid.add_axis("image", detail::index_values(cfg.study_images_per_point));

    struct PointIds {
        json perm;
        std::string eval;
    };
    std::vector<PointIds> points;

    TaskDag dag;
    const std::size_t total = grid.expansion_size();
    for (std::size_t i = 0; i < total; ++i) {
        const json perm = grid.permutation(i);
        json synth_params{{"schedule", "study"},
                          {"seed_tag", "study"},
                          {"image", perm.at("image")},
                          {"bw_hz", perm.at("bw_hz")},
                          {"fd_s", perm.at("fd_s")},
                          {"fi_s", perm.at("fi_s")},
                          {"cfg", cfg.synth_config_json()}};
        const auto synth = dag.add(TaskKind::Synth, synth_params);
        const auto record = dag.add(
            TaskKind::Record,
            json{{"snr_db", cfg.study_snr_db}, {"image", perm.at("image")},
                 {"bw_hz", perm.at("bw_hz")}, {"fd_s", perm.at("fd_s")},
                 {"fi_s", perm.at("fi_s")}, {"cfg", cfg.record_config_json()}},
            {synth});
        const auto spec = dag.add(
            TaskKind::Spectrogram,
            json{{"fft_size", cfg.stft.fft_size}, {"hop", cfg.stft.hop}}, {record});
        const auto label = dag.add(TaskKind::Label, json::object(), {record, spec});
        const auto detect = dag.add(
            TaskKind::Detect, json{{"cfg", cfg.detector_config_json()}}, {spec});
        dag.add(TaskKind::Extract, json::object(), {detect, spec});
        const auto eval =
            dag.add(TaskKind::Eval,
                    json{{"deviations", true},
                         {"record_id", record},
                         {"iou_threshold", cfg.iou_threshold}},
                    {label, detect, spec});
        points.push_back({perm, eval});
    }

    ExperimentExecutor executor(cfg);
    StudyResult result;
    result.manifest = run_dag(dag, executor, opts);

    // deviations grouped by the axis that drives each feature
    std::map<std::string, std::map<double, std::vector<double>>> grouped;
    for (const auto& p : points) {
        const auto it = result.manifest.entries.find(p.eval);
        if (it == result.manifest.entries.end() || it->second.status != "done") continue;
        const auto report = read_json_file(opts.run_dir / (p.eval + ".eval.json"));
        const auto& dev = report.at("deviations");
        for (const auto& v : dev.at("b_w_pct")) {
            grouped["b_w"][p.perm.at("bw_hz").get<double>()].push_back(v.get<double>());
            result.overall["b_w"].push_back(v.get<double>());
        }
        for (const auto& v : dev.at("f_c_pct")) {
            grouped["f_c"][p.perm.at("bw_hz").get<double>()].push_back(v.get<double>());
            result.overall["f_c"].push_back(v.get<double>());
        }
        for (const auto& v : dev.at("fd_pct")) {
            grouped["fd"][p.perm.at("fd_s").get<double>()].push_back(v.get<double>());
            result.overall["fd"].push_back(v.get<double>());
        }
        if (!report.at("fi_pct").is_null()) {
            grouped["fi"][p.perm.at("fi_s").get<double>()].push_back(
                report.at("fi_pct").get<double>());
            result.overall["fi"].push_back(report.at("fi_pct").get<double>());
        }
    }

    CsvWriter csv({"feature", "group", "median_pct", "q1_pct", "q3_pct", "whisker_lo_pct",
                   "whisker_hi_pct", "n"});
    auto emit = [&](const std::string& feature, const std::string& group,
                    const std::vector<double>& sample) {
        const auto stats = deviation_stats(sample);
        if (!stats) return;
        csv.row({feature, group, std::to_string(stats->median), std::to_string(stats->q1),
                 std::to_string(stats->q3), std::to_string(stats->whisker_lo),
                 std::to_string(stats->whisker_hi), std::to_string(stats->n)});
    };
    for (const auto& [feature, groups] : grouped) {
        for (const auto& [value, sample] : groups)
            emit(feature, std::to_string(value), sample);
        emit(feature, "all", result.overall[feature]);
    }
    result.csv = csv.str();
    write_text_file(opts.run_dir / "feature_study.csv", result.csv);
    return result;
}

// Dataset generation without detection or evaluation: labelled spectrograms
// plus a dataset manifest for external training.
inline Manifest generate_dataset(const ExperimentConfig& cfg, const RunOptions& opts) {
    TaskDag dag;
    struct ImageIds {
        std::string record, spec, label;
    };
    std::vector<ImageIds> images;
    for (const double snr : cfg.dataset_snr_db) {
        for (int image = 0; image < cfg.dataset_images_per_point; ++image) {
            const auto synth = dag.add(
                TaskKind::Synth, json{{"schedule", "mixed"},
                                      {"seed_tag", "dataset"},
                                      {"image", image},
                                      {"cfg", cfg.synth_config_json()}});
            const auto record = dag.add(
                TaskKind::Record,
                json{{"snr_db", snr}, {"image", image}, {"cfg", cfg.record_config_json()}},
                {synth});
            const auto spec = dag.add(
                TaskKind::Spectrogram,
                json{{"fft_size", cfg.stft.fft_size}, {"hop", cfg.stft.hop}}, {record});
            const auto label = dag.add(TaskKind::Label, json::object(), {record, spec});
            images.push_back({record, spec, label});
        }
    }
    ExperimentExecutor executor(cfg);
    auto manifest = run_dag(dag, executor, opts);

    json entries = json::array();
    for (const auto& ids : images) {
        if (manifest.entries.at(ids.label).status != "done") continue;
        const auto info = read_json_file(opts.run_dir / (ids.label + ".label.json"));
        ManifestEntry e;
        e.iq_file = ids.record + ".iq";
        e.spectrogram_file = ids.spec + ".mat";
        e.label_file = ids.label + ".xml";
        e.schedule_hash = info.at("schedule_hash").get<std::string>();
        e.sync = info.at("sync");
        entries.push_back(json(e));
    }
    write_json_file(opts.run_dir / "dataset.json", json{{"entries", entries}});
    return manifest;
}

// Dataset manifest validation: every referenced file exists and the schedule
// hash matches the IQ sidecar.
inline void validate_dataset_manifest(const fs::path& run_dir) {
    const auto manifest = read_json_file(run_dir / "dataset.json");
    for (const auto& entry : manifest.at("entries")) {
        const auto e = entry.get<ManifestEntry>();
        for (const auto& file :
             {e.iq_file, e.spectrogram_file, e.label_file}) {
            if (!fs::exists(run_dir / file))
                throw Error("dataset manifest references a missing file: " + file);
        }
        const auto meta = read_json_file(
            run_dir / (fs::path(e.iq_file).stem().string() + ".meta.json"));
        if (meta.at("schedule_hash").get<std::string>() != e.schedule_hash)
            throw Error("schedule hash mismatch for " + e.iq_file);
    }
}

// Remove bulky intermediate IQ captures (and their completion markers) after
// a sweep has been aggregated. Re-running the sweep afterwards regenerates
// them; resuming an unpruned run never re-executes.
inline void prune_iq_artifacts(const fs::path& run_dir) {
    if (!fs::exists(run_dir)) return;
    std::vector<fs::path> doomed;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        if (entry.path().extension() == ".iq") {
            doomed.push_back(entry.path());
            doomed.push_back(detail::marker_path(run_dir, entry.path().stem().string()));
        }
    }
    for (const auto& p : doomed) {
        std::error_code ec;
        fs::remove(p, ec);
    }
}

} // namespace specbox
