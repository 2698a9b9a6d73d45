#include "valence/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "valence/csv.hpp"
#include "valence/errors.hpp"
#include "valence/metrics.hpp"

namespace valence::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

const std::vector<std::string> kColumnOrder{"A",  "T",  "V", "AT",
                                            "TV", "AV", "ATV"};
const std::vector<std::string> kModelOrder{"svr", "hmm", "lstm", "vrnn",
                                           "human"};
const std::vector<std::string> kPartitionOrder{"train", "val", "test"};

}  // namespace

void write_eval_json(const std::filesystem::path& path,
                     const EvalReport& report) {
  ordered_json j;
  j["model"] = report.model;
  j["modalities"] = report.modalities;
  j["partition"] = report.partition;
  j["seed"] = report.seed;
  j["fingerprint"] = report.fingerprint;
  j["mean"] = report.mean;
  j["sd"] = report.sd;
  ordered_json videos = ordered_json::object();
  for (const auto& [id, ccc] : report.per_video) videos[id] = ccc;
  j["per_video"] = videos;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

EvalReport read_eval_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  EvalReport report;
  try {
    report.model = j.at("model").get<std::string>();
    report.modalities = j.at("modalities").get<std::string>();
    report.partition = j.at("partition").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.fingerprint = j.at("fingerprint").get<std::string>();
    report.mean = j.at("mean").get<double>();
    report.sd = j.at("sd").get<double>();
    for (const auto& [id, ccc] : j.at("per_video").items()) {
      report.per_video[id] = ccc.get<double>();
    }
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return report;
}

void write_eval_csv(const std::filesystem::path& path,
                    const EvalReport& report) {
  csv::Writer w(path);
  w.row({"video_id", "ccc"});
  for (const auto& [id, ccc] : report.per_video) {
    w.row({id, csv::format_double(ccc)});
  }
}

namespace {

struct Grid {
  // partition -> model -> column -> report
  std::map<std::string, std::map<std::string, std::map<std::string,
                                                       const EvalReport*>>>
      cells;
  std::vector<std::string> partitions;
  std::vector<std::string> models;
};

Grid build_grid(std::span<const EvalReport> reports) {
  Grid grid;
  for (const auto& r : reports) {
    if (std::find(kColumnOrder.begin(), kColumnOrder.end(), r.modalities) ==
        kColumnOrder.end()) {
      throw UsageError("report: unknown modality combination '" +
                       r.modalities + "'");
    }
    grid.cells[r.partition][r.model][r.modalities] = &r;
  }
  for (const auto& p : kPartitionOrder) {
    if (grid.cells.count(p)) grid.partitions.push_back(p);
  }
  for (const auto& m : kModelOrder) {
    for (const auto& p : grid.partitions) {
      if (grid.cells[p].count(m)) {
        grid.models.push_back(m);
        break;
      }
    }
  }
  return grid;
}

}  // namespace

std::string render_report_grid(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ContractError("report: no eval reports");
  Grid grid = build_grid(reports);
  std::ostringstream os;
  for (const auto& partition : grid.partitions) {
    os << "== " << partition << " CCC (Std. Dev.) ==\n";
    os << "model ";
    for (const auto& col : kColumnOrder) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), " %12s", col.c_str());
      os << buf;
    }
    os << '\n';
    auto& by_model = grid.cells[partition];
    for (const auto& model : grid.models) {
      char head[16];
      std::snprintf(head, sizeof(head), "%-6s", model.c_str());
      os << head;
      double best = -2.0;
      std::string best_col;
      if (by_model.count(model)) {
        for (const auto& [col, rep] : by_model[model]) {
          if (rep->mean > best) {
            best = rep->mean;
            best_col = col;
          }
        }
      }
      for (const auto& col : kColumnOrder) {
        std::string cell = "--";
        if (by_model.count(model) && by_model[model].count(col)) {
          const EvalReport* rep = by_model[model][col];
          cell = metrics::format_mean_sd(rep->mean, rep->sd);
          if (col == best_col) cell += "*";
        }
        char buf[32];
        std::snprintf(buf, sizeof(buf), " %12s", cell.c_str());
        os << buf;
      }
      os << '\n';
    }
    os << '\n';
  }
  return os.str();
}

void write_report_csv(const std::filesystem::path& path,
                      std::span<const EvalReport> reports) {
  Grid grid = build_grid(reports);
  csv::Writer w(path);
  std::vector<std::string> header{"partition", "model"};
  header.insert(header.end(), kColumnOrder.begin(), kColumnOrder.end());
  w.row(header);
  for (const auto& partition : grid.partitions) {
    auto& by_model = grid.cells[partition];
    for (const auto& model : grid.models) {
      std::vector<std::string> row{partition, model};
      for (const auto& col : kColumnOrder) {
        if (by_model.count(model) && by_model[model].count(col)) {
          const EvalReport* rep = by_model[model][col];
          row.push_back(metrics::format_mean_sd(rep->mean, rep->sd));
        } else {
          row.push_back("--");
        }
      }
      w.row(row);
    }
  }
}

}  // namespace valence::cli
