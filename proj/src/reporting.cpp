#include "iclmod/reporting.hpp"

#include <algorithm>
#include <cstdio>
#include <array>
#include <map>
#include <sstream>

#include "iclmod/common.hpp"
#include "json.hpp"

namespace iclmod {

using nlohmann::json;

namespace {

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

struct LoadedReport {
    std::filesystem::path path;
    json body;
};

std::string config_label(const json& report) {
    const auto& config = report.at("config");
    std::string label = report.value("protocol", std::string("?"));
    if (config.contains("task")) label += " " + config.at("task").get<std::string>();
    if (config.contains("shot")) {
        label += " shot=" + std::to_string(config.at("shot").get<std::size_t>());
    } else if (config.contains("k")) {
        label += " k=" + std::to_string(config.at("k").get<std::size_t>());
    }
    if (config.contains("strategy")) label += " " + config.at("strategy").get<std::string>();
    if (config.contains("label_scheme")) {
        label += " " + config.at("label_scheme").get<std::string>();
    }
    if (report.contains("category")) label += " " + report.at("category").get<std::string>();
    return label;
}

}  // namespace

RunSummary summarize_run_dir(const std::filesystem::path& run_dir) {
    if (!std::filesystem::is_directory(run_dir)) {
        throw Error("run directory does not exist: " + run_dir.string());
    }
    std::vector<LoadedReport> reports;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(run_dir)) {
        if (!entry.is_regular_file()) continue;
        auto name = entry.path().filename().string();
        if (!starts_with(name, "report_") || entry.path().extension() != ".json") continue;
        LoadedReport loaded;
        loaded.path = entry.path();
        try {
            loaded.body = json::parse(read_file(entry.path()));
        } catch (const json::exception& e) {
            throw Error("corrupt report file " + entry.path().string() + ": " + e.what());
        }
        reports.push_back(std::move(loaded));
    }
    if (reports.empty()) {
        throw Error("no report_*.json files under " + run_dir.string());
    }
    std::sort(reports.begin(), reports.end(),
              [](const LoadedReport& a, const LoadedReport& b) { return a.path < b.path; });

    RunSummary summary;
    std::ostringstream md;
    md << "# Run summary\n\n";
    md << "| Config | Prec. | Rec. | F1 | FPR | Acc. |\n";
    md << "|---|---|---|---|---|---|\n";
    std::string csv =
        "report,protocol,config,seed,precision,recall,f1,fpr,accuracy,n,n_failures\n";

    // Per-sweep plot data: sweep id -> (shot, f1 mean, f1 std).
    std::map<std::string, std::vector<std::array<double, 3>>> sweeps;

    for (const auto& loaded : reports) {
        const auto& body = loaded.body;
        std::string protocol = body.value("protocol", std::string("?"));
        std::string label = config_label(body);
        if (body.contains("aggregate")) {
            const auto& agg = body.at("aggregate");
            auto cell = [&](const char* metric) {
                if (!agg.contains(metric)) return std::string("-");
                const auto& m = agg.at(metric);
                return fmt4(m.at("mean").get<double>()) + " ± " +
                       fmt4(m.at("std").get<double>());
            };
            md << "| " << label << " | " << cell("precision") << " | " << cell("recall") << " | "
               << cell("f1") << " | " << cell("fpr") << " | " << cell("accuracy") << " |\n";
        }
        if (body.contains("per_seed")) {
            for (const auto& run : body.at("per_seed")) {
                if (!run.contains("metrics")) continue;
                const auto& m = run.at("metrics");
                csv += loaded.path.filename().string() + "," + protocol + "," + label + "," +
                       std::to_string(run.at("seed").get<std::uint64_t>()) + "," +
                       fmt6(m.at("precision").get<double>()) + "," +
                       fmt6(m.at("recall").get<double>()) + "," +
                       fmt6(m.at("f1").get<double>()) + "," + fmt6(m.at("fpr").get<double>()) +
                       "," + fmt6(m.at("accuracy").get<double>()) + "," +
                       std::to_string(m.at("n").get<long>()) + "," +
                       std::to_string(m.at("n_failures").get<long>()) + "\n";
            }
        }
        if (protocol == "shot_sweep" && body.contains("aggregate")) {
            const auto& config = body.at("config");
            std::string sweep_id = config.value("sweep_id", std::string("sweep"));
            double shot = static_cast<double>(config.value("shot", std::size_t{0}));
            const auto& f1 = body.at("aggregate").at("f1");
            sweeps[sweep_id].push_back(
                {shot, f1.at("mean").get<double>(), f1.at("std").get<double>()});
        }
        if (protocol == "needle_haystack" && body.contains("sizes")) {
            std::vector<std::array<double, 3>> rows;
            for (const auto& size : body.at("sizes")) {
                rows.push_back({static_cast<double>(size.at("n").get<std::size_t>()),
                                size.at("accuracy").at("mean").get<double>(),
                                size.at("accuracy").at("std").get<double>()});
                md << "| needle n=" << size.at("n").get<std::size_t>() << " | - | - | - | - | "
                   << fmt4(size.at("accuracy").at("mean").get<double>()) << " ± "
                   << fmt4(size.at("accuracy").at("std").get<double>()) << " |\n";
            }
            sweeps["needle_" + loaded.path.stem().string()] = rows;
        }
        if (protocol == "unseen_category") {
            auto acc_of = [&](const char* setting) {
                return body.at(setting).at("accuracy").at("mean").get<double>();
            };
            md << "| " << label << " zero-shot | - | - | - | - | " << fmt4(acc_of("zero_shot"))
               << " |\n";
            md << "| " << label << " excluded | - | - | - | - | " << fmt4(acc_of("excluded"))
               << " |\n";
            md << "| " << label << " included | - | - | - | - | " << fmt4(acc_of("included"))
               << " |\n";
            md << "| " << label << " gain/gap | - | - | - | - | "
               << fmt4(body.at("gain_over_zero_shot").get<double>()) << " / "
               << fmt4(body.at("gap_vs_included").get<double>()) << " |\n";
        }
    }

    for (auto& [sweep_id, rows] : sweeps) {
        std::sort(rows.begin(), rows.end());
        std::string data = "x,f1_mean,f1_std\n";
        for (const auto& row : rows) {
            data += std::to_string(static_cast<long>(row[0])) + "," + fmt6(row[1]) + "," +
                    fmt6(row[2]) + "\n";
        }
        summary.plot_data.emplace_back("f1_curve_" + sweep_id, data);
    }
    summary.markdown = md.str();
    summary.csv = csv;
    return summary;
}

void write_summary(const RunSummary& summary, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir / "summary.md", summary.markdown);
    write_file_atomic(out_dir / "summary.csv", summary.csv);
    for (const auto& [stem, data] : summary.plot_data) {
        write_file_atomic(out_dir / (stem + ".csv"), data);
    }
}

}  // namespace iclmod
