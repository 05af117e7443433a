#pragma once

#include <map>
#include <string>
#include <vector>

namespace fire {

struct RunSummary {
    std::string method;
    uint64_t seed = 0;
    double final_test_accuracy = 0.0;
    double max_post_reset_drop = 0.0;  // pre-reset test acc minus epoch-0 test acc, worst chunk
    double mean_dfi = 0.0;             // mean over test rows of the layer-mean DfI
    double mean_sfe = 0.0;             // mean reinit SFE over reset events
};

struct MethodSummary {
    std::string method;
    int num_seeds = 0;
    double final_accuracy_mean = 0.0, final_accuracy_std = 0.0;
    double max_drop_mean = 0.0, max_drop_std = 0.0;
    double mean_dfi_mean = 0.0, mean_dfi_std = 0.0;
    double mean_sfe_mean = 0.0, mean_sfe_std = 0.0;
};

struct Report {
    std::vector<RunSummary> runs;
    std::vector<MethodSummary> methods;
};

// Aggregates every records_*.csv under dir (resumed partials excluded).
// Writes summary.csv and summary.txt next to them and returns the data.
Report report(const std::string& dir);

std::string report_text_table(const Report& rep);

// Minimal CSV-with-header reader shared by report and the test suites.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const;
    const std::string& at(size_t row, const std::string& col) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace fire
