#include "vpf/forecast.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "vpf/csv.hpp"
#include "vpf/error.hpp"

namespace vpf::forecast {

ForecastSet ForecastSet::between(Timestamp from, Timestamp to) const {
  ForecastSet out;
  out.model = model;
  for (const auto& r : records)
    if (r.origin >= from && r.origin < to) out.records.push_back(r);
  return out;
}

void write_archive(std::ostream& out, const ForecastSet& set, const grid::PowerSeries& truth) {
  out << kArchiveHeader << '\n';
  for (const auto& rec : set.records) {
    const std::string origin = format_timestamp(rec.origin);
    for (std::size_t k = 1; k <= rec.values.size(); ++k) {
      const Timestamp t = rec.target_time(k);
      out << origin << ',' << k << ',' << csv::format_double(rec.values[k - 1]) << ',';
      const bool inside = t >= truth.start && t < truth.end();
      if (inside) {
        const std::size_t i = truth.index_of(t);
        out << csv::format_double(truth.values[i]) << ',' << static_cast<int>(truth.status[i]) << '\n';
      } else {
        out << ",1\n";
      }
    }
  }
}

void save_archive(const std::filesystem::path& path, const ForecastSet& set, const grid::PowerSeries& truth) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_archive(out, set, truth);
}

std::vector<ArchiveRow> read_archive_rows(std::istream& in) {
  const auto lines = csv::read_lines(in);
  if (lines.empty() || lines[0] != kArchiveHeader)
    throw Error(ErrorKind::Schema, "archive header must be '" + std::string(kArchiveHeader) + "'");
  std::vector<ArchiveRow> rows;
  rows.reserve(lines.size());
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto cols = csv::split(lines[ln]);
    if (cols.size() != 5) throw ParseError(ln + 1, "expected 5 columns");
    ArchiveRow row;
    try {
      row.origin = parse_timestamp(cols[0]);
    } catch (const Error& e) {
      throw ParseError(ln + 1, e.what());
    }
    long long step = 0, status = 0;
    if (!csv::parse_int(cols[1], step) || step < 1) throw ParseError(ln + 1, "bad horizon_step");
    row.step = static_cast<std::size_t>(step);
    if (!csv::parse_double(cols[2], row.predicted)) throw ParseError(ln + 1, "bad predicted_mw");
    if (!cols[3].empty()) {
      double a = 0;
      if (!csv::parse_double(cols[3], a)) throw ParseError(ln + 1, "bad actual_mw");
      row.actual = a;
    }
    if (!csv::parse_int(cols[4], status) || (status != 0 && status != 1)) throw ParseError(ln + 1, "bad status");
    row.status = status == 0 ? grid::Status::Reliable : grid::Status::Unreliable;
    rows.push_back(row);
  }
  return rows;
}

ForecastSet read_archive(std::istream& in, std::string model_id) {
  const auto rows = read_archive_rows(in);
  ForecastSet set;
  set.model = std::move(model_id);
  for (const auto& row : rows) {
    if (row.step == 1) {
      if (!set.records.empty() && !set.records.back().values.empty() && set.records.back().origin >= row.origin)
        throw Error(ErrorKind::Schema, "archive origins not strictly increasing at " + format_timestamp(row.origin));
      set.records.push_back({row.origin, {}});
    }
    if (set.records.empty() || set.records.back().origin != row.origin ||
        set.records.back().values.size() + 1 != row.step)
      throw Error(ErrorKind::Schema, "archive steps not contiguous at origin " + format_timestamp(row.origin));
    set.records.back().values.push_back(row.predicted);
  }
  for (const auto& r : set.records)
    if (r.values.size() != set.records.front().values.size())
      throw Error(ErrorKind::Schema, "archive horizons differ between origins");
  return set;
}

ForecastSet load_archive(const std::filesystem::path& path, std::string model_id) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open archive " + path.string());
  return read_archive(in, std::move(model_id));
}

void write_audit(std::ostream& out, std::span<const AuditEntry> entries) {
  out << kAuditHeader << '\n';
  for (const auto& e : entries) {
    out << format_timestamp(e.origin) << ',' << format_timestamp(e.input_end) << ',';
    if (e.update_data_end) out << format_timestamp(*e.update_data_end);
    out << '\n';
  }
}

void save_audit(const std::filesystem::path& path, std::span<const AuditEntry> entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_audit(out, entries);
}

std::vector<AuditEntry> load_audit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open audit " + path.string());
  const auto lines = csv::read_lines(in);
  if (lines.empty() || lines[0] != kAuditHeader)
    throw Error(ErrorKind::Schema, "audit header must be '" + std::string(kAuditHeader) + "'");
  std::vector<AuditEntry> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto cols = csv::split(lines[ln]);
    if (cols.size() != 3) throw ParseError(ln + 1, "expected 3 columns");
    try {
      AuditEntry e;
      e.origin = parse_timestamp(cols[0]);
      e.input_end = parse_timestamp(cols[1]);
      if (!cols[2].empty()) e.update_data_end = parse_timestamp(cols[2]);
      out.push_back(e);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(ln + 1, e.what());
    }
  }
  return out;
}

VerifyReport verify_archive(const std::filesystem::path& archive, const std::filesystem::path& audit,
                            const grid::PowerSeries* truth) {
  VerifyReport rep;
  auto flag = [&rep](std::string msg) {
    ++rep.violations;
    if (rep.messages.size() < 20) rep.messages.push_back(std::move(msg));
  };

  std::ifstream in(archive);
  if (!in) throw Error(ErrorKind::Io, "cannot open archive " + archive.string());
  const auto rows = read_archive_rows(in);
  rep.rows = rows.size();

  std::map<Timestamp, std::size_t> steps_seen;
  for (const auto& row : rows) {
    auto& seen = steps_seen[row.origin];
    if (row.step != seen + 1)
      flag("origin " + format_timestamp(row.origin) + ": step " + std::to_string(row.step) + " out of sequence");
    seen = row.step;
    const Timestamp target = row.origin + kStep * static_cast<long long>(row.step);
    if (target <= row.origin) flag("origin " + format_timestamp(row.origin) + ": target not after origin");
    if (truth && target >= truth->start && target < truth->end()) {
      const std::size_t i = truth->index_of(target);
      const bool match = row.actual && *row.actual == truth->values[i] && row.status == truth->status[i];
      if (!match)
        flag("origin " + format_timestamp(row.origin) + " step " + std::to_string(row.step) +
             ": actual value does not match the measurement at " + format_timestamp(target));
    }
  }
  rep.origins = steps_seen.size();

  const auto entries = load_audit(audit);
  std::map<Timestamp, const AuditEntry*> by_origin;
  for (const auto& e : entries) by_origin[e.origin] = &e;
  for (const auto& [origin, steps] : steps_seen) {
    (void)steps;
    const auto it = by_origin.find(origin);
    if (it == by_origin.end()) {
      flag("origin " + format_timestamp(origin) + ": no audit entry");
      continue;
    }
    const AuditEntry& e = *it->second;
    if (e.input_end > origin)
      flag("origin " + format_timestamp(origin) + ": inputs reach " + format_timestamp(e.input_end));
    if (e.update_data_end && *e.update_data_end >= origin)
      flag("origin " + format_timestamp(origin) + ": preceding update used data up to " +
           format_timestamp(*e.update_data_end));
  }
  return rep;
}

}  // namespace vpf::forecast
