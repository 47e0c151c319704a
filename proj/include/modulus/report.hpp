#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "modulus/activation.hpp"
#include "modulus/data.hpp"
#include "modulus/error.hpp"
#include "modulus/nn.hpp"
#include "modulus/stats.hpp"
#include "modulus/train.hpp"

namespace modulus {

// ---------------------------------------------------------------------------
// Results CSV. One row per (run, epoch) plus one summary row per run whose
// epoch column reads "summary" (or "failed:<epoch>" for a diverged run) and
// whose test_acc is the best epoch accuracy.

inline constexpr std::string_view results_header =
    "run_id,dataset,model,activation,seed,batch_size,epoch,train_loss,test_acc,lr_last,wall_s";

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError("bad number '" + std::string(text) + "' in results CSV");
  }
  return v;
}

inline std::string results_rows(const RunRecord& r) {
  std::ostringstream os;
  const std::string prefix = r.run_id() + "," + std::string(name_of(r.dataset)) + "," + std::string(name_of(r.model)) +
                             "," + activation_label(r.activation) + "," + std::to_string(r.seed) + "," +
                             std::to_string(r.batch_size) + ",";
  for (std::size_t e = 0; e < r.test_accuracy.size(); ++e) {
    os << prefix << (e + 1) << ',' << format_double(r.train_loss[e]) << ',' << format_double(r.test_accuracy[e])
       << ',' << format_double(r.lr_last[e]) << ',' << format_double(r.wall_seconds[e]) << '\n';
  }
  const std::string status = r.failed ? "failed:" + std::to_string(r.failed_epoch) : "summary";
  const double final_loss = r.train_loss.empty() ? 0.0 : r.train_loss.back();
  const double final_lr = r.lr_last.empty() ? 0.0 : r.lr_last.back();
  os << prefix << status << ',' << format_double(final_loss) << ',' << format_double(r.best_accuracy) << ','
     << format_double(final_lr) << ',' << format_double(r.total_seconds()) << '\n';
  return os.str();
}

inline std::string results_csv(const std::vector<RunRecord>& records) {
  std::string out(results_header);
  out += '\n';
  for (const RunRecord& r : records) out += results_rows(r);
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline std::uint64_t parse_u64(std::string_view text, std::size_t line) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError("results CSV line " + std::to_string(line) + ": bad integer '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace detail

/// Rebuilds run records from a results CSV. Runs without a summary row
/// (interrupted mid-write) are dropped.
inline std::vector<RunRecord> parse_results_csv(std::string_view text) {
  std::vector<RunRecord> records;
  std::map<std::string, std::size_t> open;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != results_header) throw FormatError("results CSV header mismatch: '" + std::string(line) + "'");
      header_seen = true;
      continue;
    }
    const auto f = detail::split_csv_line(line);
    if (f.size() != 11) {
      throw FormatError("results CSV line " + std::to_string(line_no) + ": expected 11 fields, got " +
                        std::to_string(f.size()));
    }
    const std::string id(f[0]);
    auto it = open.find(id);
    if (it == open.end()) {
      RunRecord r;
      r.dataset = parse_dataset_name(f[1]);
      r.model = parse_architecture(f[2]);
      r.activation = parse_activation_label(f[3]);
      r.seed = detail::parse_u64(f[4], line_no);
      r.batch_size = detail::parse_u64(f[5], line_no);
      records.push_back(std::move(r));
      it = open.emplace(id, records.size() - 1).first;
    }
    RunRecord& r = records[it->second];
    const std::string_view epoch = f[6];
    if (epoch == "summary" || epoch.starts_with("failed:")) {
      r.best_accuracy = parse_double(f[8]);
      r.epochs = r.test_accuracy.size();
      if (epoch != "summary") {
        r.failed = true;
        r.failed_epoch = detail::parse_u64(epoch.substr(7), line_no);
        r.failure = "epoch " + std::to_string(r.failed_epoch);
      }
      open.erase(it);
      // A completed run id may legitimately reappear only if rerun; keep the
      // first complete copy.
      continue;
    }
    if (detail::parse_u64(epoch, line_no) != r.test_accuracy.size() + 1) {
      throw FormatError("results CSV line " + std::to_string(line_no) + ": epoch " + std::string(epoch) +
                        " out of sequence for " + id);
    }
    r.train_loss.push_back(parse_double(f[7]));
    r.test_accuracy.push_back(parse_double(f[8]));
    r.lr_last.push_back(parse_double(f[9]));
    r.wall_seconds.push_back(parse_double(f[10]));
  }
  // Drop runs that never reached their summary row.
  std::vector<RunRecord> complete;
  for (std::size_t i = 0; i < records.size(); ++i) {
    bool incomplete = false;
    for (const auto& [id, index] : open) incomplete |= index == i;
    if (!incomplete) complete.push_back(std::move(records[i]));
  }
  return complete;
}

// ---------------------------------------------------------------------------
// Significance report.

struct CellSummary {
  std::string activation;  // activation label
  ActivationKind kind;
  std::vector<std::uint64_t> seeds;
  std::vector<double> best;  // best accuracy per seed, seed order
  double mean = 0.0;
  double std = 0.0;
  std::size_t rank = 0;  // 1 = highest mean
  std::size_t failed_runs = 0;
  /// Proposed kind significantly above the best benchmark.
  bool beats_best_benchmark = false;
  /// Soft approximation significantly above the modulus, or the subject of
  /// an explicit comparison that came out significant.
  bool starred = false;
};

struct Comparison {
  std::string subject;
  std::string baseline;
  double p_value;  // NaN when the pooled sample is degenerate
  bool significant;
};

struct GroupReport {
  DatasetName dataset;
  Architecture model;
  std::vector<CellSummary> cells;  // ordered by activation label
  std::string best_benchmark;      // empty when the group has no benchmark kind
  std::vector<Comparison> versus_benchmark;
  std::vector<Comparison> versus_modulus;
  std::vector<Comparison> explicit_comparisons;

  const CellSummary* cell(std::string_view label) const {
    for (const CellSummary& c : cells) {
      if (c.activation == label) return &c;
    }
    return nullptr;
  }
};

struct SignificanceReport {
  double alpha = 0.05;
  std::vector<GroupReport> groups;
};

struct ReportOptions {
  double alpha = 0.05;
  /// (subject, baseline) activation labels to test one-sidedly.
  std::vector<std::pair<std::string, std::string>> compare;
};

namespace detail {

inline Comparison compare_cells(const CellSummary& subject, const CellSummary& baseline, double alpha) {
  Comparison c{subject.activation, baseline.activation, std::numeric_limits<double>::quiet_NaN(), false};
  try {
    c.p_value = rank_sum_one_sided(subject.best, baseline.best).p_value;
    c.significant = c.p_value < alpha;
  } catch (const DegenerateSampleError&) {
  }
  return c;
}

}  // namespace detail

/// Aggregates best accuracies per (dataset, model, activation), ranks the
/// activations by mean, and runs the one-sided rank-sum comparisons.
inline SignificanceReport build_report(const std::vector<RunRecord>& records, const ReportOptions& options = {}) {
  using GroupKey = std::pair<DatasetName, Architecture>;
  std::map<GroupKey, std::map<std::string, std::map<std::uint64_t, const RunRecord*>>> grouped;
  std::vector<std::string> duplicates;
  for (const RunRecord& r : records) {
    auto& slot = grouped[{r.dataset, r.model}][activation_label(r.activation)][r.seed];
    if (slot != nullptr) duplicates.push_back(r.run_id());
    slot = &r;
  }
  if (!duplicates.empty()) {
    std::string msg = "duplicate runs:";
    for (const auto& d : duplicates) msg += " " + d;
    throw ReportError(msg);
  }

  // Every cell of a group must cover the same seeds.
  std::vector<std::string> missing;
  for (const auto& [key, by_act] : grouped) {
    std::set<std::uint64_t> all_seeds;
    for (const auto& [label, by_seed] : by_act) {
      for (const auto& [seed, rec] : by_seed) all_seeds.insert(seed);
    }
    for (const auto& [label, by_seed] : by_act) {
      for (std::uint64_t seed : all_seeds) {
        if (!by_seed.contains(seed)) {
          missing.push_back("(" + std::string(name_of(key.first)) + ", " + std::string(name_of(key.second)) + ", " +
                            label + ", " + std::to_string(seed) + ")");
        }
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "ragged result matrix, missing:";
    for (const auto& m : missing) msg += " " + m;
    throw ReportError(msg);
  }

  SignificanceReport report;
  report.alpha = options.alpha;
  for (const auto& [key, by_act] : grouped) {
    GroupReport group{key.first, key.second, {}, {}, {}, {}, {}};
    for (const auto& [label, by_seed] : by_act) {
      CellSummary cell;
      cell.activation = label;
      cell.kind = parse_activation_label(label).kind();
      for (const auto& [seed, rec] : by_seed) {
        cell.seeds.push_back(seed);
        cell.best.push_back(rec->best_accuracy);
        if (rec->failed) ++cell.failed_runs;
      }
      cell.mean = mean(cell.best);
      cell.std = sample_std(cell.best);
      group.cells.push_back(std::move(cell));
    }

    std::vector<std::size_t> order(group.cells.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return group.cells[a].mean > group.cells[b].mean;
    });
    for (std::size_t r = 0; r < order.size(); ++r) group.cells[order[r]].rank = r + 1;

    const CellSummary* best_benchmark = nullptr;
    for (std::size_t i : order) {
      if (!is_proposed(group.cells[i].kind)) {
        best_benchmark = &group.cells[i];
        break;
      }
    }
    const CellSummary* modulus_cell = nullptr;
    for (const CellSummary& c : group.cells) {
      if (c.kind == ActivationKind::modulus && modulus_cell == nullptr) modulus_cell = &c;
    }
    if (best_benchmark != nullptr) group.best_benchmark = best_benchmark->activation;

    for (CellSummary& c : group.cells) {
      if (!is_proposed(c.kind)) continue;
      if (best_benchmark != nullptr && c.best.size() >= 2) {
        Comparison cmp = detail::compare_cells(c, *best_benchmark, options.alpha);
        c.beats_best_benchmark = cmp.significant;
        group.versus_benchmark.push_back(cmp);
      }
      if (c.kind != ActivationKind::modulus && modulus_cell != nullptr && c.best.size() >= 2) {
        Comparison cmp = detail::compare_cells(c, *modulus_cell, options.alpha);
        c.starred = c.starred || cmp.significant;
        group.versus_modulus.push_back(cmp);
      }
    }
    for (const auto& [subject, baseline] : options.compare) {
      auto find = [&](const std::string& label) -> CellSummary* {
        for (CellSummary& c : group.cells) {
          if (c.activation == label) return &c;
        }
        return nullptr;
      };
      CellSummary* s = find(subject);
      CellSummary* b = find(baseline);
      if (s == nullptr || b == nullptr || s->best.size() < 2) continue;
      Comparison cmp = detail::compare_cells(*s, *b, options.alpha);
      s->starred = s->starred || cmp.significant;
      group.explicit_comparisons.push_back(cmp);
    }
    report.groups.push_back(std::move(group));
  }
  return report;
}

namespace detail {

inline std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

inline std::string format_p(double p) {
  if (std::isnan(p)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", p);
  return buf;
}

}  // namespace detail

/// Markdown rendering: one table per dataset, activations as rows and models
/// as columns. Cells read "mean ± std" in percent; "(k)" marks the top four
/// ranks, bold marks a proposed activation significantly above the best
/// benchmark, "*" marks a significant soft-approximation or explicit win,
/// and "†" marks cells containing diverged runs.
inline std::string render_markdown(const SignificanceReport& report) {
  std::ostringstream os;
  std::map<DatasetName, std::vector<const GroupReport*>> by_dataset;
  for (const GroupReport& g : report.groups) by_dataset[g.dataset].push_back(&g);

  for (const auto& [dataset, groups] : by_dataset) {
    os << "## " << display_name_of(dataset) << "\n\n| Activation |";
    for (const GroupReport* g : groups) os << ' ' << display_name_of(g->model) << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < groups.size(); ++i) os << "---|";
    os << '\n';

    // Rows: benchmark kinds first, then proposed, in canonical kind order.
    std::vector<std::string> labels;
    for (ActivationKind kind : all_activation_kinds) {
      std::set<std::string> seen;
      for (const GroupReport* g : groups) {
        for (const CellSummary& c : g->cells) {
          if (c.kind == kind) seen.insert(c.activation);
        }
      }
      labels.insert(labels.end(), seen.begin(), seen.end());
    }
    std::stable_partition(labels.begin(), labels.end(),
                          [](const std::string& l) { return !is_proposed(parse_activation_label(l).kind()); });

    for (const std::string& label : labels) {
      const Activation act = parse_activation_label(label);
      os << "| " << display_name_of(act.kind());
      if (label.find('@') != std::string::npos) os << " (beta=" << label.substr(label.find('@') + 1) << ")";
      os << " |";
      for (const GroupReport* g : groups) {
        const CellSummary* c = g->cell(label);
        if (c == nullptr) {
          os << " - |";
          continue;
        }
        std::string text = detail::percent(c->mean) + " ± " + detail::percent(c->std);
        if (c->beats_best_benchmark) text = "**" + text + "**";
        if (c->starred) text += "*";
        if (c->failed_runs > 0) text += "†";
        if (c->rank <= 4) text += " (" + std::to_string(c->rank) + ")";
        os << ' ' << text << " |";
      }
      os << '\n';
    }
    os << '\n';
  }

  bool any = false;
  for (const GroupReport& g : report.groups) {
    const auto emit = [&](const std::vector<Comparison>& list, std::string_view rule) {
      for (const Comparison& c : list) {
        if (!any) {
          os << "## One-sided rank-sum comparisons (alpha = " << report.alpha << ")\n\n"
             << "| Dataset | Model | Rule | Subject | Baseline | p-value | Significant |\n"
             << "|---|---|---|---|---|---|---|\n";
          any = true;
        }
        os << "| " << display_name_of(g.dataset) << " | " << display_name_of(g.model) << " | " << rule << " | "
           << c.subject << " | " << c.baseline << " | " << detail::format_p(c.p_value) << " | "
           << (c.significant ? "yes" : "no") << " |\n";
      }
    };
    emit(g.versus_benchmark, "vs best benchmark");
    emit(g.versus_modulus, "vs modulus");
    emit(g.explicit_comparisons, "explicit");
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Learning curves: per (dataset, model, activation, epoch) mean test accuracy
// and 95% normal confidence half-width 1.96 * std / sqrt(n).

inline constexpr std::string_view curves_header = "dataset,model,activation,epoch,n,mean_acc,ci95_half_width,degenerate";

inline std::string export_curves(const std::vector<RunRecord>& records) {
  using Key = std::tuple<DatasetName, Architecture, std::string>;
  std::map<Key, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : records) groups[{r.dataset, r.model, activation_label(r.activation)}].push_back(&r);

  std::ostringstream os;
  os << curves_header << '\n';
  for (const auto& [key, runs] : groups) {
    const std::size_t epochs = runs.front()->test_accuracy.size();
    for (const RunRecord* r : runs) {
      if (r->test_accuracy.size() != epochs) {
        throw ReportError("runs of " + std::get<2>(key) + " have differing epoch counts");
      }
    }
    for (std::size_t e = 0; e < epochs; ++e) {
      std::vector<double> xs;
      for (const RunRecord* r : runs) xs.push_back(r->test_accuracy[e]);
      const double m = mean(xs);
      const double half = xs.size() < 2 ? 0.0 : 1.96 * sample_std(xs) / std::sqrt(static_cast<double>(xs.size()));
      os << name_of(std::get<0>(key)) << ',' << name_of(std::get<1>(key)) << ',' << std::get<2>(key) << ','
         << (e + 1) << ',' << xs.size() << ',' << format_double(m) << ',' << format_double(half) << ','
         << (xs.size() < 2 ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

}  // namespace modulus
