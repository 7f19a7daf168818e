#include "qnet/experiments.hpp"

#include "qnet/entmath.hpp"
#include "qnet/pcs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qnet::exp {

namespace {

constexpr std::uint64_t kTrafficStream = 1;

proto::StrategyKind kind_from_string(const std::string& s) {
    if (s == "ODO" || s == "odo") return proto::StrategyKind::ODO;
    if (s == "UCP" || s == "ucp") return proto::StrategyKind::UCP;
    if (s == "ACP" || s == "acp") return proto::StrategyKind::ACP;
    throw std::invalid_argument("scenario: unknown strategy kind '" + s + "'");
}

std::string kind_to_string(proto::StrategyKind k) {
    switch (k) {
        case proto::StrategyKind::ODO: return "ODO";
        case proto::StrategyKind::UCP: return "UCP";
        case proto::StrategyKind::ACP: return "ACP";
    }
    return "UCP";
}

TrafficPhase phase_from_json(const json& j) {
    TrafficPhase p;
    p.src_lo = j.at("src_lo").get<int>();
    p.src_hi = j.at("src_hi").get<int>();
    if (p.src_hi < p.src_lo) {
        throw std::invalid_argument("scenario: empty traffic src range");
    }
    if (j.contains("dst_offset_lo")) {
        p.use_offset = true;
        p.offset_lo = j.at("dst_offset_lo").get<int>();
        p.offset_hi = j.at("dst_offset_hi").get<int>();
        if (p.offset_hi < p.offset_lo || p.offset_lo == 0) {
            throw std::invalid_argument("scenario: bad dst offset range");
        }
        return p;
    }
    p.dst_lo = j.at("dst_lo").get<int>();
    p.dst_hi = j.at("dst_hi").get<int>();
    if (p.dst_hi < p.dst_lo) {
        throw std::invalid_argument("scenario: empty traffic dst range");
    }
    return p;
}

json phase_to_json(const TrafficPhase& p) {
    if (p.use_offset) {
        return json{{"src_lo", p.src_lo}, {"src_hi", p.src_hi},
                    {"dst_offset_lo", p.offset_lo}, {"dst_offset_hi", p.offset_hi}};
    }
    return json{{"src_lo", p.src_lo}, {"src_hi", p.src_hi},
                {"dst_lo", p.dst_lo}, {"dst_hi", p.dst_hi}};
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Scenario load_scenario(const json& doc) {
    Scenario s;
    s.name = doc.value("name", std::string("scenario"));
    s.kind = doc.value("kind", std::string("network"));
    if (s.kind == "pcs_grid") {
        if (doc.contains("grid")) {
            const json& g = doc.at("grid");
            s.grid_from = g.value("from", 0.25);
            s.grid_to = g.value("to", 1.0);
            s.grid_step = g.value("step", 0.05);
        }
        return s;
    }
    if (s.kind != "network") {
        throw std::invalid_argument("scenario: unknown kind '" + s.kind + "'");
    }
    s.topology_doc = doc.at("topology");
    // Validate the topology eagerly so `validate` catches schema errors.
    net::load_topology(s.topology_doc);

    for (const json& sj : doc.at("strategies")) {
        proto::StrategyConfig cfg;
        cfg.name = sj.at("name").get<std::string>();
        cfg.kind = kind_from_string(sj.at("kind").get<std::string>());
        cfg.background_slots_per_node = sj.value("background_slots_per_node", 0);
        cfg.acp_ewma_alpha = sj.value("acp_ewma_alpha", 0.3);
        cfg.acp_window_ns = sj.value("acp_window_ns", SimTime{1'000'000'000});
        if (sj.contains("distill_threshold") && !sj.at("distill_threshold").is_null()) {
            cfg.distill_threshold = sj.at("distill_threshold").get<double>();
        }
        cfg.evict_fidelity = sj.value("evict_fidelity", 0.3);
        s.strategies.push_back(std::move(cfg));
    }
    if (s.strategies.empty()) throw std::invalid_argument("scenario: no strategies");

    const json& tj = doc.at("traffic");
    s.traffic.mean_interarrival_ns = tj.at("mean_interarrival_ns").get<double>();
    if (!(s.traffic.mean_interarrival_ns > 0)) {
        throw std::invalid_argument("scenario: nonpositive interarrival");
    }
    s.traffic.phase_a = phase_from_json(tj.at("phase_a"));
    if (tj.contains("phase_b") && !tj.at("phase_b").is_null()) {
        s.traffic.phase_b = phase_from_json(tj.at("phase_b"));
        s.traffic.shift_at_ns = tj.at("shift_at_ns").get<SimTime>();
    }
    s.traffic.pairs_requested = tj.value("pairs_requested", 1);
    if (tj.contains("min_fidelity") && !tj.at("min_fidelity").is_null()) {
        s.traffic.min_fidelity = tj.at("min_fidelity").get<double>();
    }

    s.duration_ns = doc.at("duration_ns").get<SimTime>();
    if (s.duration_ns <= 0) throw std::invalid_argument("scenario: nonpositive duration");
    for (const json& sd : doc.at("seeds")) s.seeds.push_back(sd.get<std::uint64_t>());
    if (s.seeds.empty()) throw std::invalid_argument("scenario: no seeds");
    s.ma_window = doc.value("ma_window", 50);
    return s;
}

json scenario_to_json(const Scenario& s) {
    json doc;
    doc["name"] = s.name;
    doc["kind"] = s.kind;
    if (s.kind == "pcs_grid") {
        doc["grid"] = json{{"from", s.grid_from}, {"to", s.grid_to}, {"step", s.grid_step}};
        return doc;
    }
    doc["topology"] = s.topology_doc;
    json strategies = json::array();
    for (const proto::StrategyConfig& cfg : s.strategies) {
        json sj{{"name", cfg.name},
                {"kind", kind_to_string(cfg.kind)},
                {"background_slots_per_node", cfg.background_slots_per_node},
                {"acp_ewma_alpha", cfg.acp_ewma_alpha},
                {"acp_window_ns", cfg.acp_window_ns},
                {"evict_fidelity", cfg.evict_fidelity}};
        if (cfg.distill_threshold) sj["distill_threshold"] = *cfg.distill_threshold;
        strategies.push_back(std::move(sj));
    }
    doc["strategies"] = strategies;
    json tj{{"mean_interarrival_ns", s.traffic.mean_interarrival_ns},
            {"phase_a", phase_to_json(s.traffic.phase_a)},
            {"pairs_requested", s.traffic.pairs_requested}};
    if (s.traffic.phase_b) {
        tj["phase_b"] = phase_to_json(*s.traffic.phase_b);
        tj["shift_at_ns"] = s.traffic.shift_at_ns;
    }
    if (s.traffic.min_fidelity) tj["min_fidelity"] = *s.traffic.min_fidelity;
    doc["traffic"] = tj;
    doc["duration_ns"] = s.duration_ns;
    doc["seeds"] = s.seeds;
    doc["ma_window"] = s.ma_window;
    return doc;
}

RunResult run_one(const Scenario& s, const proto::StrategyConfig& strategy,
                  std::uint64_t seed, bool want_trace) {
    net::Topology topo = net::load_topology(s.topology_doc);
    proto::NetworkSim sim(topo, strategy, seed);
    if (want_trace) sim.engine().enable_trace();

    // Traffic comes from its own stream so every strategy sharing this seed
    // sees the identical request sequence.
    des::RngStream traffic(seed, kTrafficStream);
    const int n = static_cast<int>(topo.nodes.size());
    auto check_phase = [n](const TrafficPhase& p) {
        if (p.src_lo < 0 || p.src_hi >= n ||
            (!p.use_offset && (p.dst_lo < 0 || p.dst_hi >= n))) {
            throw std::invalid_argument("traffic phase references nodes outside topology");
        }
    };
    check_phase(s.traffic.phase_a);
    if (s.traffic.phase_b) check_phase(*s.traffic.phase_b);

    std::uint64_t next_id = 1;
    double t = 0;
    for (;;) {
        t += traffic.exponential(1.0 / s.traffic.mean_interarrival_ns);
        const SimTime arrival = static_cast<SimTime>(std::llround(t));
        if (arrival >= s.duration_ns) break;
        const TrafficPhase& phase =
            (s.traffic.phase_b && arrival >= s.traffic.shift_at_ns)
                ? *s.traffic.phase_b
                : s.traffic.phase_a;
        auto draw = [&traffic](int lo, int hi) {
            return lo + static_cast<int>(traffic.uniform() * (hi - lo + 1));
        };
        const int src = draw(phase.src_lo, phase.src_hi);
        int dst;
        if (phase.use_offset) {
            dst = src + draw(phase.offset_lo, phase.offset_hi);
            dst = std::max(0, std::min(n - 1, dst));
            if (dst == src) dst = src > 0 ? src - 1 : src + 1;
        } else {
            dst = draw(phase.dst_lo, phase.dst_hi);
            int guard = 0;
            while (dst == src) {
                dst = draw(phase.dst_lo, phase.dst_hi);
                if (++guard > 64) {
                    throw std::invalid_argument("traffic phase cannot produce dst != src");
                }
            }
        }
        proto::Request req;
        req.id = next_id++;
        req.src = src;
        req.dst = dst;
        req.arrival = arrival;
        req.pairs_requested = s.traffic.pairs_requested;
        req.min_fidelity = s.traffic.min_fidelity;
        sim.submit(req);
    }
    sim.run_until(s.duration_ns);

    RunResult out;
    out.records = sim.records();
    out.trace_hash = want_trace ? sim.engine().trace_hash() : 0;
    out.oversubscriptions = sim.auditor().oversubscriptions();
    out.negative_releases = sim.auditor().negative_releases();
    out.memory_consistent = sim.memory_consistent();
    return out;
}

MetricsFrame run_scenario(const Scenario& s) {
    if (s.kind != "network") {
        throw std::invalid_argument("run_scenario: not a network scenario");
    }
    MetricsFrame frame;
    for (const proto::StrategyConfig& strategy : s.strategies) {
        for (std::uint64_t seed : s.seeds) {
            RunResult r = run_one(s, strategy, seed);
            frame.oversubscriptions += r.oversubscriptions;
            frame.negative_releases += r.negative_releases;
            frame.memory_consistent = frame.memory_consistent && r.memory_consistent;
            for (const proto::ServiceRecord& rec : r.records) {
                RequestRow row;
                row.strategy = strategy.name;
                row.seed = seed;
                row.request_id = rec.request_id;
                row.src = rec.src;
                row.dst = rec.dst;
                row.arrival = rec.arrival;
                row.pairs_requested = rec.pairs_requested;
                row.completed_at = rec.completed_at;
                row.censored = rec.censored;
                row.fidelities = rec.delivered_fidelities;
                frame.rows.push_back(std::move(row));
            }
        }
    }
    // Canonical order regardless of execution order.
    std::sort(frame.rows.begin(), frame.rows.end(),
              [](const RequestRow& a, const RequestRow& b) {
                  return std::tie(a.strategy, a.seed, a.request_id) <
                         std::tie(b.strategy, b.seed, b.request_id);
              });
    return frame;
}

void write_metrics_csv(const MetricsFrame& frame, std::ostream& os) {
    os << "# qnetsim-metrics v1\n";
    os << "strategy,seed,request_id,src,dst,arrival_ns,pairs_requested,"
          "completed_ns,time_to_serve_ns,censored,delivered,fidelities\n";
    for (const RequestRow& r : frame.rows) {
        os << r.strategy << ',' << r.seed << ',' << r.request_id << ',' << r.src << ','
           << r.dst << ',' << r.arrival << ',' << r.pairs_requested << ',';
        if (r.completed_at) {
            os << *r.completed_at << ',' << (*r.completed_at - r.arrival) << ',';
        } else {
            os << ",,";
        }
        os << (r.censored ? 1 : 0) << ',' << r.fidelities.size() << ',';
        for (std::size_t i = 0; i < r.fidelities.size(); ++i) {
            if (i) os << ';';
            os << format_double(r.fidelities[i]);
        }
        os << '\n';
    }
}

MetricsFrame read_metrics_csv(std::istream& is) {
    MetricsFrame frame;
    std::string line;
    if (!std::getline(is, line) || line != "# qnetsim-metrics v1") {
        throw std::runtime_error("metrics csv: missing schema header");
    }
    std::getline(is, line);  // column header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                cells.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        cells.push_back(cur);
        if (cells.size() != 12) throw std::runtime_error("metrics csv: bad row");
        RequestRow r;
        r.strategy = cells[0];
        r.seed = std::stoull(cells[1]);
        r.request_id = std::stoull(cells[2]);
        r.src = std::stoi(cells[3]);
        r.dst = std::stoi(cells[4]);
        r.arrival = std::stoll(cells[5]);
        r.pairs_requested = std::stoi(cells[6]);
        if (!cells[7].empty()) r.completed_at = std::stoll(cells[7]);
        r.censored = cells[9] == "1";
        if (!cells[11].empty()) {
            std::stringstream fs(cells[11]);
            std::string tok;
            while (std::getline(fs, tok, ';')) r.fidelities.push_back(std::stod(tok));
        }
        frame.rows.push_back(std::move(r));
    }
    return frame;
}

std::vector<StrategySummary> summarize(const MetricsFrame& frame,
                                       const std::string& baseline) {
    std::map<std::string, std::vector<const RequestRow*>> by_strategy;
    for (const RequestRow& r : frame.rows) by_strategy[r.strategy].push_back(&r);
    if (by_strategy.empty()) throw std::invalid_argument("summarize: empty frame");

    std::vector<StrategySummary> table;
    for (auto& [name, rows] : by_strategy) {
        StrategySummary s;
        s.strategy = name;
        std::vector<double> tts;
        double fid_sum = 0;
        for (const RequestRow* r : rows) {
            if (r->censored) {
                ++s.censored;
            } else {
                ++s.completed;
                tts.push_back(static_cast<double>(r->time_to_serve()));
            }
            for (double f : r->fidelities) {
                fid_sum += f;
                ++s.delivered_pairs;
            }
        }
        if (!tts.empty()) {
            std::sort(tts.begin(), tts.end());
            double sum = 0;
            for (double x : tts) sum += x;
            s.mean_tts_ns = sum / static_cast<double>(tts.size());
            s.median_tts_ns = tts[tts.size() / 2];
            const std::size_t p95_idx = std::min(
                tts.size() - 1,
                static_cast<std::size_t>(std::ceil(0.95 * tts.size())) - 1);
            s.p95_tts_ns = tts[p95_idx];
        }
        s.mean_fidelity = s.delivered_pairs ? fid_sum / s.delivered_pairs : 0.0;
        table.push_back(std::move(s));
    }
    double base_mean = 0;
    bool have_base = false;
    for (const StrategySummary& s : table) {
        if (s.strategy == baseline && s.completed > 0) {
            base_mean = s.mean_tts_ns;
            have_base = true;
        }
    }
    for (StrategySummary& s : table) {
        s.tts_vs_baseline =
            (have_base && base_mean > 0) ? (s.mean_tts_ns - base_mean) / base_mean : 0.0;
    }
    return table;
}

std::string summary_text(const std::vector<StrategySummary>& table) {
    std::ostringstream os;
    os << "strategy      completed censored  mean_tts_ms median_tts_ms p95_tts_ms"
          "  mean_fidelity delivered  vs_baseline\n";
    for (const StrategySummary& s : table) {
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "%-13s %9d %8d %12.3f %13.3f %10.3f %14.5f %9d %11.1f%%\n",
                      s.strategy.c_str(), s.completed, s.censored, s.mean_tts_ns / 1e6,
                      s.median_tts_ns / 1e6, s.p95_tts_ns / 1e6, s.mean_fidelity,
                      s.delivered_pairs, 100.0 * s.tts_vs_baseline);
        os << buf;
    }
    return os.str();
}

std::vector<std::pair<SimTime, double>> rolling_time_to_serve(
    const MetricsFrame& frame, const std::string& strategy, std::uint64_t seed,
    int window) {
    if (window < 1) throw std::invalid_argument("rolling: window < 1");
    std::vector<const RequestRow*> rows;
    for (const RequestRow& r : frame.rows) {
        if (r.strategy == strategy && r.seed == seed && !r.censored) rows.push_back(&r);
    }
    std::sort(rows.begin(), rows.end(), [](const RequestRow* a, const RequestRow* b) {
        return std::tie(a->arrival, a->request_id) < std::tie(b->arrival, b->request_id);
    });
    std::vector<std::pair<SimTime, double>> out;
    std::deque<double> buf;
    double sum = 0;
    for (const RequestRow* r : rows) {
        buf.push_back(static_cast<double>(r->time_to_serve()));
        sum += buf.back();
        if (static_cast<int>(buf.size()) > window) {
            sum -= buf.front();
            buf.pop_front();
        }
        out.emplace_back(r->arrival, sum / static_cast<double>(buf.size()));
    }
    return out;
}

std::vector<PcsGridRow> run_pcs_grid(double from, double to, double step) {
    std::vector<PcsGridRow> rows;
    for (double f = from; f <= to + 1e-12; f += step) {
        const double fc = std::min(f, 1.0);
        for (int v = 0; v < 2; ++v) {
            dm::PcsCircuitConfig cfg;
            cfg.variant = v == 0 ? dm::PcsVariant::X_only : dm::PcsVariant::X_and_Z;
            cfg.recursion_level = 0;
            cfg.gate_depolarizing_prob = 0.0;
            cfg.channel_fidelity = fc;
            const entmath::PcsPrediction oracle = dm::simulate_pcs(cfg);
            const entmath::PcsPrediction formula =
                v == 0 ? entmath::pcs_x_predict(fc) : entmath::pcs_xz_predict(fc);
            PcsGridRow row;
            row.f = fc;
            row.variant = v == 0 ? "X" : "XZ";
            row.c_formula = formula.postselect_prob;
            row.c_oracle = oracle.postselect_prob;
            row.fp_formula = formula.output_fidelity;
            row.fp_oracle = oracle.output_fidelity;
            row.deviation = std::max(std::abs(row.c_formula - row.c_oracle),
                                     std::abs(row.fp_formula - row.fp_oracle));
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_pcs_grid_csv(const std::vector<PcsGridRow>& rows, std::ostream& os) {
    os << "# qnetsim-pcs-grid v1\n";
    os << "f,variant,c_formula,c_oracle,fprime_formula,fprime_oracle,deviation\n";
    for (const PcsGridRow& r : rows) {
        os << format_double(r.f) << ',' << r.variant << ',' << format_double(r.c_formula)
           << ',' << format_double(r.c_oracle) << ',' << format_double(r.fp_formula)
           << ',' << format_double(r.fp_oracle) << ',' << format_double(r.deviation)
           << '\n';
    }
}

}  // namespace qnet::exp
