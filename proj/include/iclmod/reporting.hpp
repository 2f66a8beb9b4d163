#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace iclmod {

// Summarizes a run directory: every report_*.json below `run_dir` becomes a
// row. Outputs are byte-stable for an unchanged directory.
struct RunSummary {
    std::string markdown;                 // metric table, "Prec. Rec. F1 FPR Acc." columns
    std::string csv;                      // one row per (report, seed)
    // (file stem, csv content) per sweep: x-axis value vs f1 mean/std,
    // intended for external plotting.
    std::vector<std::pair<std::string, std::string>> plot_data;
};

RunSummary summarize_run_dir(const std::filesystem::path& run_dir);

void write_summary(const RunSummary& summary, const std::filesystem::path& out_dir);

}  // namespace iclmod
