#include "fire/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fire {

namespace fs = std::filesystem;

int CsvTable::column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

const std::string& CsvTable::at(size_t row, const std::string& col) const {
    const int c = column_index(col);
    if (c < 0) throw std::out_of_range("csv: no column '" + col + "'");
    return rows.at(row).at(static_cast<size_t>(c));
}

CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("csv: cannot open " + path);
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string item;
        std::istringstream ss(s);
        while (std::getline(ss, item, ',')) out.push_back(item);
        if (!s.empty() && s.back() == ',') out.push_back("");
        return out;
    };
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (t.columns.empty()) t.columns = split(line);
        else t.rows.push_back(split(line));
    }
    if (t.columns.empty()) throw std::runtime_error("csv: empty file " + path);
    return t;
}

namespace {

struct RunRows {
    std::string method;
    uint64_t seed = 0;
    // test rows as (chunk, epoch) -> (accuracy, mean dfi, sfe)
    struct Row {
        int chunk, epoch;
        double acc, mean_dfi, sfe;
    };
    std::vector<Row> test_rows;
};

RunSummary summarize_run(const RunRows& run) {
    RunSummary s;
    s.method = run.method;
    s.seed = run.seed;
    if (run.test_rows.empty()) return s;

    int max_chunk = 0;
    for (const auto& r : run.test_rows) max_chunk = std::max(max_chunk, r.chunk);

    // last test row of each chunk and the epoch-0 row of each chunk
    std::map<int, RunRows::Row> last_of_chunk, first_of_chunk;
    double dfi_acc = 0.0;
    for (const auto& r : run.test_rows) {
        auto it = last_of_chunk.find(r.chunk);
        if (it == last_of_chunk.end() || r.epoch > it->second.epoch) last_of_chunk[r.chunk] = r;
        if (r.epoch == 0) first_of_chunk[r.chunk] = r;
        dfi_acc += r.mean_dfi;
    }
    s.mean_dfi = dfi_acc / static_cast<double>(run.test_rows.size());
    s.final_test_accuracy = last_of_chunk.rbegin()->second.acc;

    double worst = 0.0, sfe_acc = 0.0;
    int events = 0;
    for (int k = 1; k <= max_chunk; ++k) {
        auto pre = last_of_chunk.find(k - 1);
        auto post = first_of_chunk.find(k);
        if (pre == last_of_chunk.end() || post == first_of_chunk.end()) continue;
        worst = std::max(worst, pre->second.acc - post->second.acc);
        sfe_acc += post->second.sfe;
        ++events;
    }
    s.max_post_reset_drop = worst;
    s.mean_sfe = events > 0 ? sfe_acc / events : 0.0;
    return s;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());  // population std; 0 for a single seed
    return {mean, std::sqrt(var)};
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

Report report(const std::string& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) throw std::runtime_error("report: no such directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("records_", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".csv" && name.find("_resumed") == std::string::npos)
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("report: no records_*.csv in " + dir);

    Report rep;
    std::map<std::string, std::vector<RunSummary>> by_method;
    for (const auto& f : files) {
        CsvTable t = read_csv(f.string());
        std::vector<int> dfi_cols;
        for (size_t c = 0; c < t.columns.size(); ++c)
            if (t.columns[c].rfind("dfi_l", 0) == 0) dfi_cols.push_back(static_cast<int>(c));

        RunRows run;
        for (size_t i = 0; i < t.rows.size(); ++i) {
            if (t.at(i, "split") != "test") continue;
            run.method = t.at(i, "method");
            run.seed = std::stoull(t.at(i, "seed"));
            RunRows::Row r;
            r.chunk = std::stoi(t.at(i, "chunk"));
            r.epoch = std::stoi(t.at(i, "epoch"));
            r.acc = std::stod(t.at(i, "accuracy"));
            r.sfe = std::stod(t.at(i, "sfe_pre_reset"));
            double dfi_sum = 0.0;
            int n = 0;
            for (int c : dfi_cols) {
                const std::string& v = t.rows[i][static_cast<size_t>(c)];
                if (!v.empty()) {
                    dfi_sum += std::stod(v);
                    ++n;
                }
            }
            r.mean_dfi = n > 0 ? dfi_sum / n : 0.0;
            run.test_rows.push_back(r);
        }
        RunSummary s = summarize_run(run);
        by_method[s.method].push_back(s);
        rep.runs.push_back(s);
    }

    for (auto& [method, runs] : by_method) {
        MethodSummary m;
        m.method = method;
        m.num_seeds = static_cast<int>(runs.size());
        std::vector<double> acc, drop, dfi_v, sfe_v;
        for (const auto& r : runs) {
            acc.push_back(r.final_test_accuracy);
            drop.push_back(r.max_post_reset_drop);
            dfi_v.push_back(r.mean_dfi);
            sfe_v.push_back(r.mean_sfe);
        }
        std::tie(m.final_accuracy_mean, m.final_accuracy_std) = mean_std(acc);
        std::tie(m.max_drop_mean, m.max_drop_std) = mean_std(drop);
        std::tie(m.mean_dfi_mean, m.mean_dfi_std) = mean_std(dfi_v);
        std::tie(m.mean_sfe_mean, m.mean_sfe_std) = mean_std(sfe_v);
        rep.methods.push_back(m);
    }

    std::ofstream sc(fs::path(dir) / "summary.csv", std::ios::trunc);
    sc << "# fire-summary-csv v1 (std is population std over seeds)\n";
    sc << "method,num_seeds,final_accuracy_mean,final_accuracy_std,max_drop_mean,max_drop_std,"
          "mean_dfi_mean,mean_dfi_std,mean_sfe_mean,mean_sfe_std\n";
    for (const auto& m : rep.methods)
        sc << m.method << "," << m.num_seeds << "," << fmt(m.final_accuracy_mean) << ","
           << fmt(m.final_accuracy_std) << "," << fmt(m.max_drop_mean) << "," << fmt(m.max_drop_std)
           << "," << fmt(m.mean_dfi_mean) << "," << fmt(m.mean_dfi_std) << ","
           << fmt(m.mean_sfe_mean) << "," << fmt(m.mean_sfe_std) << "\n";

    std::ofstream st(fs::path(dir) / "summary.txt", std::ios::trunc);
    st << report_text_table(rep);
    return rep;
}

std::string report_text_table(const Report& rep) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-16s %5s  %-19s %-19s %-21s %-19s\n", "method", "seeds",
                  "final_acc", "max_drop", "mean_dfi", "mean_sfe");
    out << line;
    for (const auto& m : rep.methods) {
        std::snprintf(line, sizeof(line),
                      "%-16s %5d  %8.4f +- %7.4f  %8.4f +- %7.4f  %10.4f +- %7.4f  %8.2f +- %7.2f\n",
                      m.method.c_str(), m.num_seeds, m.final_accuracy_mean, m.final_accuracy_std,
                      m.max_drop_mean, m.max_drop_std, m.mean_dfi_mean, m.mean_dfi_std,
                      m.mean_sfe_mean, m.mean_sfe_std);
        out << line;
    }
    return out.str();
}

}  // namespace fire
