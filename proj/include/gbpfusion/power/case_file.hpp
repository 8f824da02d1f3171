#pragma once

// Reader and writer for the MATPOWER-style tabular case format.
//
// Supported subset:
//   function mpc = <name>
//   mpc.version = '2';
//   mpc.baseMVA = <value>;
//   mpc.bus = [ ... ];     bus_i type Pd Qd Gs Bs area Vm Va [baseKV zone Vmax Vmin]
//   mpc.gen = [ ... ];     bus Pg Qg Qmax Qmin Vg [mBase status Pmax Pmin ...]
//   mpc.branch = [ ... ];  fbus tbus r x b [rateA rateB rateC ratio angle status angmin angmax]
// Rows end with ';'. Text after '%' is a comment. Powers are MW / MVAr and
// converted to per-unit on baseMVA. Any other table (e.g. mpc.gencost) or
// statement is skipped and listed in the parse report.

#include <charconv>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gbpfusion/power/network.hpp"

namespace gbpfusion::power {

struct CaseParseReport {
  std::string name;
  std::size_t total_lines = 0;
  std::size_t consumed_lines = 0;
  /// (1-based line number, reason) for every line that was not consumed.
  std::vector<std::pair<std::size_t, std::string>> skipped;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::string_view strip_comment(std::string_view s) {
  const auto pct = s.find('%');
  return pct == std::string_view::npos ? s : s.substr(0, pct);
}

struct Token {
  double value;
  std::size_t column;  // 1-based
};

/// Splits a table row into numbers. `line` is the raw line (for columns).
inline std::vector<Token> parse_row(std::string_view body, std::size_t line_no, std::size_t base_column) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < body.size()) {
    while (i < body.size() && (body[i] == ' ' || body[i] == '\t' || body[i] == ',' || body[i] == '\r')) ++i;
    if (i >= body.size()) break;
    std::size_t j = i;
    while (j < body.size() && body[j] != ' ' && body[j] != '\t' && body[j] != ',' && body[j] != '\r') ++j;
    const std::string_view tok = body.substr(i, j - i);
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      throw ParseError("expected a number, found '" + std::string(tok) + "'", line_no, base_column + i + 1);
    }
    out.push_back({v, base_column + i + 1});
    i = j;
  }
  return out;
}

inline double col(const std::vector<Token>& row, std::size_t k, double fallback) {
  return k < row.size() ? row[k].value : fallback;
}

inline int as_int(const Token& t, std::size_t line_no) {
  const double r = std::round(t.value);
  if (r != t.value) throw ParseError("expected an integer", line_no, t.column);
  return static_cast<int>(r);
}

}  // namespace detail

/// Parses the documented MATPOWER subset. Throws ParseError for malformed
/// rows and ConfigError for semantic problems (e.g. no slack bus).
inline BusBranchModel parse_case_file(std::string_view text, CaseParseReport* report = nullptr) {
  using namespace detail;
  BusBranchModel model;
  CaseParseReport rep;
  enum class Table { None, Bus, Gen, Branch, Other };
  Table table = Table::None;
  std::string other_table;
  bool have_base = false;

  struct PendingRow {
    std::vector<Token> tokens;
    std::size_t line;
  };
  std::vector<PendingRow> bus_rows, gen_rows, branch_rows;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (nl == std::string_view::npos && raw.empty()) break;
    ++line_no;
    const std::string_view code = strip_comment(raw);
    const std::string_view t = trim(code);

    if (table == Table::Other) {
      rep.skipped.emplace_back(line_no, "inside unsupported table " + other_table);
      if (t.find(']') != std::string_view::npos) table = Table::None;
      continue;
    }
    if (table != Table::None) {
      if (t.empty()) {
        ++rep.consumed_lines;
        continue;
      }
      std::string_view body = t;
      bool closes = false;
      const auto bracket = body.find(']');
      if (bracket != std::string_view::npos) {
        if (trim(body.substr(bracket + 1)) != ";" && !trim(body.substr(bracket + 1)).empty()) {
          throw ParseError("unexpected text after ']'", line_no, static_cast<std::size_t>(code.find(']')) + 2);
        }
        closes = true;
        body = body.substr(0, bracket);
      }
      body = trim(body);
      if (!body.empty()) {
        if (body.back() == ';') body.remove_suffix(1);
        const std::size_t base_column = static_cast<std::size_t>(body.data() - raw.data());
        auto tokens = parse_row(body, line_no, base_column);
        if (!tokens.empty()) {
          auto& dest = table == Table::Bus ? bus_rows : table == Table::Gen ? gen_rows : branch_rows;
          dest.push_back({std::move(tokens), line_no});
        }
      }
      ++rep.consumed_lines;
      if (closes) table = Table::None;
      continue;
    }

    if (t.empty()) {
      ++rep.consumed_lines;
      continue;
    }
    if (t.starts_with("function")) {
      const auto eq = t.find('=');
      if (eq != std::string_view::npos) rep.name = std::string(trim(t.substr(eq + 1)));
      ++rep.consumed_lines;
      continue;
    }
    const auto eq = t.find('=');
    if (t.starts_with("mpc.") && eq != std::string_view::npos) {
      const std::string_view key = trim(t.substr(4, eq - 4));
      std::string_view value = trim(t.substr(eq + 1));
      if (value.starts_with("[")) {
        Table next = key == "bus" ? Table::Bus : key == "gen" ? Table::Gen : key == "branch" ? Table::Branch : Table::Other;
        if (next == Table::Other) {
          other_table = std::string(key);
          rep.skipped.emplace_back(line_no, "unsupported table " + other_table);
          if (value.find(']') == std::string_view::npos) table = Table::Other;
          continue;
        }
        table = next;
        value.remove_prefix(1);
        value = trim(value);
        ++rep.consumed_lines;
        if (!value.empty()) {
          bool closes = false;
          const auto bracket = value.find(']');
          if (bracket != std::string_view::npos) {
            closes = true;
            value = value.substr(0, bracket);
          }
          value = trim(value);
          if (!value.empty() && value.back() == ';') value.remove_suffix(1);
          if (!value.empty()) {
            auto tokens = parse_row(value, line_no, static_cast<std::size_t>(value.data() - raw.data()));
            auto& dest = table == Table::Bus ? bus_rows : table == Table::Gen ? gen_rows : branch_rows;
            dest.push_back({std::move(tokens), line_no});
          }
          if (closes) table = Table::None;
        }
        continue;
      }
      if (key == "baseMVA") {
        if (value.ends_with(";")) value.remove_suffix(1);
        value = trim(value);
        auto tokens = parse_row(value, line_no, static_cast<std::size_t>(value.data() - raw.data()));
        if (tokens.size() != 1) throw ParseError("baseMVA expects one number", line_no);
        model.base_mva = tokens[0].value;
        have_base = true;
        ++rep.consumed_lines;
        continue;
      }
      if (key == "version") {
        ++rep.consumed_lines;
        continue;
      }
    }
    rep.skipped.emplace_back(line_no, "unrecognized statement");
  }
  rep.total_lines = line_no;
  if (table != Table::None) throw ParseError("unterminated table", line_no);
  if (!have_base) throw ParseError("missing mpc.baseMVA", line_no);
  if (!(model.base_mva > 0.0)) throw ConfigError("baseMVA must be positive");
  const double base = model.base_mva;

  for (const auto& row : bus_rows) {
    const auto& r = row.tokens;
    if (r.size() < 9) throw ParseError("bus row needs at least 9 columns", row.line, r.back().column);
    Bus b;
    b.id = as_int(r[0], row.line);
    const int type = as_int(r[1], row.line);
    if (type < 1 || type > 3) throw ParseError("unsupported bus type " + std::to_string(type), row.line, r[1].column);
    b.type = static_cast<BusType>(type);
    b.pd = r[2].value / base;
    b.qd = r[3].value / base;
    b.gs = r[4].value / base;
    b.bs = r[5].value / base;
    b.area = as_int(r[6], row.line);
    b.vm = r[7].value;
    b.va_deg = r[8].value;
    b.base_kv = col(r, 9, 0.0);
    b.zone = static_cast<int>(col(r, 10, 1.0));
    b.vmax = col(r, 11, 1.1);
    b.vmin = col(r, 12, 0.9);
    model.buses.push_back(b);
  }
  for (const auto& row : gen_rows) {
    const auto& r = row.tokens;
    if (r.size() < 6) throw ParseError("gen row needs at least 6 columns", row.line, r.back().column);
    Generator g;
    g.bus = as_int(r[0], row.line);
    g.pg = r[1].value / base;
    g.qg = r[2].value / base;
    g.qmax = r[3].value / base;
    g.qmin = r[4].value / base;
    g.vg = r[5].value;
    g.mbase = col(r, 6, base);
    g.in_service = col(r, 7, 1.0) > 0.0;
    g.pmax = col(r, 8, 0.0) / base;
    g.pmin = col(r, 9, 0.0) / base;
    model.generators.push_back(g);
  }
  for (const auto& row : branch_rows) {
    const auto& r = row.tokens;
    if (r.size() < 5) throw ParseError("branch row needs at least 5 columns", row.line, r.back().column);
    Branch br;
    br.from = as_int(r[0], row.line);
    br.to = as_int(r[1], row.line);
    br.r = r[2].value;
    br.x = r[3].value;
    br.b = r[4].value;
    br.rate_a = col(r, 5, 0.0);
    br.rate_b = col(r, 6, 0.0);
    br.rate_c = col(r, 7, 0.0);
    const double ratio = col(r, 8, 0.0);
    br.tap = ratio == 0.0 ? 1.0 : ratio;
    br.shift_deg = col(r, 9, 0.0);
    br.in_service = col(r, 10, 1.0) > 0.0;
    br.angmin = col(r, 11, -360.0);
    br.angmax = col(r, 12, 360.0);
    model.branches.push_back(br);
  }
  model.validate();
  if (report) *report = std::move(rep);
  return model;
}

/// Writes `model` back in the same tabular subset (17 significant digits).
inline std::string emit_case_file(const BusBranchModel& model, const std::string& name = "case") {
  const double base = model.base_mva;
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "function mpc = " << name << "\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = " << num(base) << ";\n\n";
  out << "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
  out << "mpc.bus = [\n";
  for (const auto& b : model.buses) {
    out << "\t" << b.id << "\t" << static_cast<int>(b.type) << "\t" << num(b.pd * base) << "\t" << num(b.qd * base)
        << "\t" << num(b.gs * base) << "\t" << num(b.bs * base) << "\t" << b.area << "\t" << num(b.vm) << "\t"
        << num(b.va_deg) << "\t" << num(b.base_kv) << "\t" << b.zone << "\t" << num(b.vmax) << "\t" << num(b.vmin)
        << ";\n";
  }
  out << "];\n\n";
  out << "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
  out << "mpc.gen = [\n";
  for (const auto& g : model.generators) {
    out << "\t" << g.bus << "\t" << num(g.pg * base) << "\t" << num(g.qg * base) << "\t" << num(g.qmax * base) << "\t"
        << num(g.qmin * base) << "\t" << num(g.vg) << "\t" << num(g.mbase) << "\t" << (g.in_service ? 1 : 0) << "\t"
        << num(g.pmax * base) << "\t" << num(g.pmin * base) << ";\n";
  }
  out << "];\n\n";
  out << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
  out << "mpc.branch = [\n";
  for (const auto& br : model.branches) {
    out << "\t" << br.from << "\t" << br.to << "\t" << num(br.r) << "\t" << num(br.x) << "\t" << num(br.b) << "\t"
        << num(br.rate_a) << "\t" << num(br.rate_b) << "\t" << num(br.rate_c) << "\t"
        << num(br.tap == 1.0 ? 0.0 : br.tap) << "\t" << num(br.shift_deg) << "\t" << (br.in_service ? 1 : 0) << "\t"
        << num(br.angmin) << "\t" << num(br.angmax) << ";\n";
  }
  out << "];\n";
  return out.str();
}

}  // namespace gbpfusion::power
