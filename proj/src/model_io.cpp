/*
 * Copyright 2026 The omni-refine Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "omni/model_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "omni/error.hpp"

namespace omni {

std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_validation("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_validation("cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail_validation("write to '" + path.string() + "' failed");
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::optional<double> to_number(const std::string &s) {
  double v = 0.0;
  const char *first = s.data(), *last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// lexer shared by the model and property grammars

enum class Tok { Ident, Number, String, Angle, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1;
};

std::vector<Token> lex(const std::string &src, bool angle_names) {
  std::vector<Token> out;
  int line = 1;
  std::size_t i = 0;
  auto err = [&](const std::string &what) {
    fail_validation("line " + std::to_string(line) + ": " + what);
  };
  while (i < src.size()) {
    const char c = src[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      out.push_back({Tok::Ident, src.substr(i, j - i), line});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < src.size() &&
                std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.'))
        ++j;
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          j = k;
          while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        }
      }
      out.push_back({Tok::Number, src.substr(i, j - i), line});
      i = j;
    } else if (c == '"') {
      const std::size_t j = src.find('"', i + 1);
      if (j == std::string::npos) err("unterminated string");
      out.push_back({Tok::String, src.substr(i + 1, j - i - 1), line});
      i = j + 1;
    } else if (c == '<' && angle_names) {
      const std::size_t j = src.find('>', i + 1);
      if (j == std::string::npos) err("unterminated <name>");
      const std::string name = trim(src.substr(i + 1, j - i - 1));
      if (name.empty() || name.find_first_of(" \t\r\n") != std::string::npos)
        err("bad state name <" + name + ">");
      out.push_back({Tok::Angle, name, line});
      i = j + 1;
    } else if (c == '-' && i + 1 < src.size() && src[i + 1] == '>') {
      out.push_back({Tok::Punct, "->", line});
      i += 2;
    } else if (c == '<' && i + 1 < src.size() && src[i + 1] == '=') {
      out.push_back({Tok::Punct, "<=", line});
      i += 2;
    } else if (std::string_view("=;:()+-*/'[],|&!?").find(c) != std::string_view::npos) {
      out.push_back({Tok::Punct, std::string(1, c), line});
      ++i;
    } else {
      err(std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Tok::End, "", line});
  return out;
}

class Cursor {
 public:
  explicit Cursor(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token &peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  Token next() {
    Token t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool is(const std::string &punct, std::size_t ahead = 0) const {
    const Token &t = peek(ahead);
    return t.kind == Tok::Punct && t.text == punct;
  }
  bool is_word(const std::string &word, std::size_t ahead = 0) const {
    const Token &t = peek(ahead);
    return t.kind == Tok::Ident && t.text == word;
  }
  bool accept(const std::string &punct) {
    if (!is(punct)) return false;
    next();
    return true;
  }
  void expect(const std::string &punct) {
    if (!accept(punct)) fail("expected '" + punct + "'");
  }
  [[noreturn]] void fail(const std::string &what) const {
    const Token &t = peek();
    fail_validation("line " + std::to_string(t.line) + ": " + what +
                    (t.kind == Tok::End ? " at end of input" : " near '" + t.text + "'"));
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// constant arithmetic: + - * / unary minus, parentheses
class ExprParser {
 public:
  ExprParser(Cursor &cur, const std::map<std::string, double> &consts)
      : cur_(cur), consts_(consts) {}

  double expr() {
    double v = term();
    for (;;) {
      if (cur_.accept("+")) v += term();
      else if (cur_.accept("-")) v -= term();
      else return v;
    }
  }

 private:
  double term() {
    double v = factor();
    for (;;) {
      if (cur_.accept("*")) {
        v *= factor();
      } else if (cur_.is("/")) {
        cur_.next();
        const double d = factor();
        if (d == 0.0) cur_.fail("division by zero");
        v /= d;
      } else {
        return v;
      }
    }
  }
  double factor() {
    if (cur_.accept("-")) return -factor();
    if (cur_.accept("+")) return factor();
    if (cur_.accept("(")) {
      const double v = expr();
      cur_.expect(")");
      return v;
    }
    const Token &t = cur_.peek();
    if (t.kind == Tok::Number) {
      auto v = to_number(t.text);
      if (!v) cur_.fail("bad number");
      cur_.next();
      return *v;
    }
    if (t.kind == Tok::Ident) {
      auto it = consts_.find(t.text);
      if (it == consts_.end()) cur_.fail("unknown constant '" + t.text + "'");
      cur_.next();
      return it->second;
    }
    cur_.fail("expected a number");
  }

  Cursor &cur_;
  const std::map<std::string, double> &consts_;
};

std::string state_name(Cursor &cur) {
  const Token &t = cur.peek();
  if (t.kind != Tok::Angle && t.kind != Tok::Ident) cur.fail("expected a state name");
  return cur.next().text;
}

// s=<name> or s'=<name>
std::string state_ref(Cursor &cur, bool primed) {
  if (!cur.is_word("s")) cur.fail("expected 's'");
  cur.next();
  if (primed) cur.expect("'");
  cur.expect("=");
  return state_name(cur);
}

struct PendingCommand {
  std::string source;
  std::optional<double> rate;
  std::vector<std::pair<std::string, double>> terms;
  int line = 0;
};

}  // namespace

std::vector<std::string> ModelSkeleton::deferred() const {
  std::vector<std::string> out;
  for (std::size_t s = 0; s < states.size(); ++s)
    if (!jumps[s].empty() && !exit_rate[s]) out.push_back(states[s]);
  return out;
}

Ctmc ModelSkeleton::bind(const std::map<std::string, double> &rates) const {
  std::vector<std::vector<Transition>> rows(states.size());
  for (std::size_t s = 0; s < states.size(); ++s) {
    if (jumps[s].empty()) continue;
    double r = 0.0;
    if (exit_rate[s]) {
      r = *exit_rate[s];
    } else {
      auto it = rates.find(states[s]);
      if (it == rates.end())
        fail_validation("no rate for component '" + states[s] + "'");
      r = it->second;
    }
    if (!(r > 0.0) || !std::isfinite(r))
      fail_validation("rate of '" + states[s] + "' must be positive");
    for (const auto &t : jumps[s]) rows[s].push_back({t.target, t.rate * r});
  }
  return Ctmc(states, initial, rows, labels, unit);
}

Ctmc ModelSkeleton::build() const {
  const auto missing = deferred();
  if (!missing.empty())
    fail_validation("component '" + missing.front() +
                    "' has no inline rate; bind observations first");
  return bind({});
}

Ctmc ModelSkeleton::jump_chain() const {
  return Ctmc(states, initial, jumps, labels, unit);
}

ModelSkeleton parse_model(const std::string &text,
                          const std::map<std::string, double> &overrides) {
  Cursor cur(lex(text, true));
  ModelSkeleton out;
  out.constants = overrides;
  std::map<std::string, std::size_t> index;
  auto declare = [&](const std::string &name) {
    if (index.emplace(name, out.states.size()).second) out.states.push_back(name);
  };
  std::vector<PendingCommand> commands;
  std::map<std::string, std::vector<std::string>> label_defs;
  std::vector<std::pair<std::string, std::optional<double>>> init;
  bool saw_init = false;

  while (cur.peek().kind != Tok::End) {
    ExprParser ex(cur, out.constants);
    if (cur.is_word("ctmc") || cur.is_word("endmodule")) {
      cur.next();
    } else if (cur.is_word("module")) {
      cur.next();
      state_name(cur);
    } else if (cur.is_word("const")) {
      cur.next();
      if (cur.is_word("double") || cur.is_word("int")) cur.next();
      if (cur.peek().kind != Tok::Ident) cur.fail("expected a constant name");
      const std::string name = cur.next().text;
      cur.expect("=");
      const double v = ex.expr();
      cur.expect(";");
      out.constants.emplace(name, v);  // command-line overrides win
    } else if (cur.is_word("component")) {
      cur.next();
      declare(state_name(cur));
      while (cur.accept(",")) declare(state_name(cur));
      cur.expect(";");
    } else if (cur.peek().kind == Tok::Angle && cur.is(";", 1)) {
      declare(cur.next().text);
      cur.next();
    } else if (cur.is_word("s")) {
      PendingCommand cmd;
      cmd.line = cur.peek().line;
      cmd.source = state_ref(cur, false);
      declare(cmd.source);
      cur.expect("->");
      if (cur.is_word("rate") && cur.is("(", 1)) {
        cur.next();
        cur.expect("(");
        cmd.rate = ex.expr();
        cur.expect(")");
        cur.accept(":");
      }
      do {
        double p = 1.0;
        const bool bare = cur.is("(") && cur.is_word("s", 1) && cur.is("'", 2);
        if (!bare) {
          p = ex.expr();
          cur.expect(":");
        }
        cur.expect("(");
        const std::string target = state_ref(cur, true);
        cur.expect(")");
        cmd.terms.emplace_back(target, p);
      } while (cur.accept("+"));
      cur.expect(";");
      commands.push_back(std::move(cmd));
    } else if (cur.is_word("label")) {
      cur.next();
      if (cur.peek().kind != Tok::String) cur.fail("expected a quoted label");
      const std::string ap = cur.next().text;
      cur.expect("=");
      auto &members = label_defs[ap];
      if (!cur.is(";")) {
        do members.push_back(state_ref(cur, false));
        while (cur.accept("|"));
      }
      cur.expect(";");
    } else if (cur.is_word("init")) {
      cur.next();
      if (saw_init) cur.fail("duplicate init clause");
      saw_init = true;
      do {
        const std::string name = state_name(cur);
        std::optional<double> p;
        if (cur.accept(":")) p = ex.expr();
        init.emplace_back(name, p);
      } while (cur.accept(","));
      cur.expect(";");
    } else if (cur.is_word("shift")) {
      cur.next();
      out.time_shift = ex.expr();
      if (!(out.time_shift >= 0.0) || !std::isfinite(out.time_shift))
        cur.fail("shift must be finite and >= 0");
      cur.expect(";");
    } else if (cur.is_word("unit")) {
      cur.next();
      if (cur.peek().kind != Tok::Ident) cur.fail("expected a time unit");
      out.unit = parse_time_unit(cur.next().text);
      cur.expect(";");
    } else {
      cur.fail("unexpected token");
    }
  }

  const std::size_t n = out.states.size();
  if (n == 0) fail_validation("model declares no states");
  out.jumps.assign(n, {});
  out.exit_rate.assign(n, std::nullopt);
  out.labels.assign(n, {});
  std::vector<bool> has_command(n, false);
  auto lookup = [&](const std::string &name, int line) {
    auto it = index.find(name);
    if (it == index.end())
      fail_validation((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                      "unknown label '" + name + "'");
    return it->second;
  };
  for (const auto &cmd : commands) {
    const std::size_t s = index.at(cmd.source);
    const std::string where = "line " + std::to_string(cmd.line) + ": ";
    if (has_command[s])
      fail_validation(where + "duplicate command for state '" + cmd.source + "'");
    has_command[s] = true;
    double sum = 0.0;
    for (const auto &[target, p] : cmd.terms) {
      if (!(p >= 0.0) || !std::isfinite(p))
        fail_validation(where + "negative or non-finite probability");
      sum += p;
      const std::size_t t = lookup(target, cmd.line);
      if (t == s && p > 0.0)
        fail_validation(where + "self-loop on '" + cmd.source + "'");
      if (p > 0.0) out.jumps[s].push_back({t, p});
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.12g", sum);
      fail_validation(where + "probabilities sum to " + buf);
    }
    if (cmd.rate) {
      if (!(*cmd.rate > 0.0) || !std::isfinite(*cmd.rate))
        fail_validation(where + "rate must be positive");
      out.exit_rate[s] = cmd.rate;
    }
  }
  for (const auto &[ap, members] : label_defs)
    for (const auto &m : members) out.labels[lookup(m, 0)].insert(ap);

  out.initial.assign(n, 0.0);
  if (init.empty()) {
    out.initial[0] = 1.0;
  } else {
    double assigned = 0.0;
    std::size_t open = 0;
    for (const auto &[name, p] : init) {
      if (p) assigned += *p;
      else ++open;
      (void)name;
    }
    // entries without a probability share the remainder
    const double share = open ? (1.0 - assigned) / static_cast<double>(open) : 0.0;
    for (const auto &[name, p] : init) out.initial[lookup(name, 0)] += p ? *p : share;
  }
  return out;
}

ModelSkeleton read_model(const std::filesystem::path &path,
                         const std::map<std::string, double> &overrides) {
  try {
    return parse_model(read_text_file(path), overrides);
  } catch (const Error &e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string export_ctmc(const Ctmc &model, double time_shift) {
  std::ostringstream out;
  out << "ctmc\n\n";
  out << "unit " << to_string(model.unit()) << ";\n";
  if (time_shift > 0.0) out << "shift " << fmt(time_shift) << ";\n";
  out << "\n";
  for (StateIndex s = 0; s < model.size(); ++s)
    out << "component <" << model.name(s) << ">;\n";
  out << "\n";
  for (StateIndex s = 0; s < model.size(); ++s) {
    if (model.is_absorbing(s)) continue;
    const double exit = model.exit_rate(s);
    out << "s=<" << model.name(s) << "> -> rate(" << fmt(exit) << ")";
    bool first = true;
    for (const auto &t : model.transitions(s)) {
      out << (first ? " " : " + ") << fmt(t.rate / exit) << ":(s'=<"
          << model.name(t.target) << ">)";
      first = false;
    }
    out << ";\n";
  }
  std::map<std::string, std::vector<StateIndex>> labels;
  for (StateIndex s = 0; s < model.size(); ++s)
    for (const auto &ap : model.labels(s)) labels[ap].push_back(s);
  if (!labels.empty()) out << "\n";
  for (const auto &[ap, members] : labels) {
    out << "label \"" << ap << "\" =";
    for (std::size_t i = 0; i < members.size(); ++i)
      out << (i ? " | " : " ") << "s=<" << model.name(members[i]) << ">";
    out << ";\n";
  }
  out << "\ninit";
  bool first = true;
  for (StateIndex s = 0; s < model.size(); ++s) {
    if (model.initial(s) <= 0.0) continue;
    out << (first ? " " : ", ") << "<" << model.name(s) << "> : " << fmt(model.initial(s));
    first = false;
  }
  out << ";\n";
  return out.str();
}

// ---------------------------------------------------------------------------

ConfigDoc parse_config(const std::string &json_text,
                       const std::filesystem::path &base_dir) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception &e) {
    fail_validation(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail_validation("config must be a JSON object");
  ConfigDoc cfg;
  try {
    if (doc.contains("unit")) cfg.unit = parse_time_unit(doc.at("unit").get<std::string>());
    if (doc.contains("components")) {
      for (const auto &[label, path] : doc.at("components").items()) {
        std::filesystem::path p = path.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        cfg.components[label] = p;
      }
    }
    auto &r = cfg.refinement;
    r.epsilon = doc.value("epsilon", r.epsilon);
    r.tail_probability = doc.value("p", r.tail_probability);
    r.delay_threshold = doc.value("delay_threshold", r.delay_threshold);
    if (doc.contains("fit")) {
      const auto &f = doc.at("fit");
      auto &fc = r.fit;
      fc.alpha = f.value("alpha", fc.alpha);
      fc.min_clusters = f.value("min_clusters", fc.min_clusters);
      fc.max_clusters = f.value("max_clusters", fc.max_clusters);
      fc.max_phases = f.value("max_phases", fc.max_phases);
      fc.max_steps = f.value("max_steps", fc.max_steps);
      fc.em_iterations = f.value("em_iterations", fc.em_iterations);
      fc.em_tolerance = f.value("em_tolerance", fc.em_tolerance);
      fc.seed = f.value("seed", fc.seed);
    }
    if (doc.contains("constants"))
      for (const auto &[name, v] : doc.at("constants").items())
        cfg.constants[name] = v.get<double>();
  } catch (const json::exception &e) {
    fail_validation(std::string("bad config field: ") + e.what());
  }
  cfg.refinement.validate();
  for (const auto &[label, path] : cfg.components)
    if (!std::filesystem::exists(path))
      fail_validation("observation file for '" + label + "' not found: " + path.string());
  return cfg;
}

ConfigDoc load_config(const std::filesystem::path &path) {
  return parse_config(read_text_file(path), path.parent_path());
}

ObservationSet parse_observations(const std::string &text,
                                  const std::string &component, TimeUnit unit,
                                  const std::string &origin) {
  ObservationSet obs{component, {}, unit};
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  bool first = true;
  while (std::getline(in, raw)) {
    ++line;
    std::string cell = trim(raw);
    if (!cell.empty() && cell.back() == ',') cell = trim(cell.substr(0, cell.size() - 1));
    if (cell.empty()) continue;
    auto v = to_number(cell);
    if (!v) {
      if (first) {  // header line
        first = false;
        continue;
      }
      fail_validation(origin + ":" + std::to_string(line) + ": not a number: '" + cell + "'");
    }
    first = false;
    if (!(*v > 0.0) || !std::isfinite(*v))
      fail_validation(origin + ":" + std::to_string(line) + ": duration must be positive");
    obs.durations.push_back(*v);
  }
  if (obs.durations.empty()) fail_validation(origin + ": no observations");
  return obs;
}

ObservationSet read_observations(const std::filesystem::path &path,
                                 const std::string &component, TimeUnit unit) {
  return parse_observations(read_text_file(path), component, unit, path.string());
}

ObservationMap load_observations(const ConfigDoc &config) {
  ObservationMap out;
  for (const auto &[label, path] : config.components)
    out[label] = read_observations(path, label, config.unit);
  return out;
}

std::vector<TimedTrace> parse_traces(const std::string &text, const Ctmc &model) {
  using nlohmann::json;
  std::vector<TimedTrace> out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string row = trim(raw);
    if (row.empty()) continue;
    const std::string where = "trace line " + std::to_string(line) + ": ";
    TimedTrace tr;
    try {
      const json doc = json::parse(row);
      for (const auto &step : doc.at("steps")) {
        const auto name = step.at("component").get<std::string>();
        const auto s = model.find(name);
        if (!s) fail_validation(where + "unknown component '" + name + "'");
        const double d = step.at("duration").get<double>();
        if (!(d >= 0.0) || !std::isfinite(d))
          fail_validation(where + "duration must be finite and >= 0");
        tr.steps.push_back({*s, d});
      }
      const auto outcome = doc.at("outcome").get<std::string>();
      const auto t = model.find(outcome);
      if (!t) fail_validation(where + "unknown outcome '" + outcome + "'");
      tr.terminal = *t;
      tr.censored = doc.value("censored", false);
    } catch (const json::exception &e) {
      fail_validation(where + e.what());
    }
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<TimedTrace> read_traces(const std::filesystem::path &path,
                                    const Ctmc &model) {
  try {
    return parse_traces(read_text_file(path), model);
  } catch (const Error &e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string format_traces(const Ctmc &model, const std::vector<TimedTrace> &traces) {
  std::ostringstream out;
  for (const auto &tr : traces) {
    out << "{\"steps\":[";
    for (std::size_t i = 0; i < tr.steps.size(); ++i) {
      out << (i ? "," : "") << "{\"component\":"
          << nlohmann::json(model.name(tr.steps[i].state)).dump()
          << ",\"duration\":" << fmt(tr.steps[i].sojourn) << "}";
    }
    out << "],\"outcome\":" << nlohmann::json(model.name(tr.terminal)).dump();
    if (tr.censored) out << ",\"censored\":true";
    out << "}\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// properties

namespace {

StateFormula formula(Cursor &cur);

StateFormula unary(Cursor &cur) {
  if (cur.accept("!")) return StateFormula::negation(unary(cur));
  if (cur.accept("(")) {
    StateFormula f = formula(cur);
    cur.expect(")");
    return f;
  }
  const Token &t = cur.peek();
  if (t.kind == Tok::String) return StateFormula::atom(cur.next().text);
  if (t.kind == Tok::Ident) {
    if (t.text == "true") {
      cur.next();
      return StateFormula::truth();
    }
    if (t.text == "false") {
      cur.next();
      return StateFormula::falsity();
    }
    if (t.text == "U" || t.text == "F") cur.fail("expected a state formula");
    return StateFormula::atom(cur.next().text);
  }
  cur.fail("expected a state formula");
}

StateFormula conjunction(Cursor &cur) {
  StateFormula f = unary(cur);
  while (cur.accept("&")) f = StateFormula::conjunction(f, unary(cur));
  return f;
}

StateFormula formula(Cursor &cur) {
  StateFormula f = conjunction(cur);
  while (cur.accept("|")) f = StateFormula::disjunction(f, conjunction(cur));
  return f;
}

Bound bound(Cursor &cur) {
  const Token &t = cur.peek();
  if (t.kind == Tok::Ident && t.text == "T") {
    cur.next();
    return {0.0, true};
  }
  if (t.kind == Tok::Ident && (t.text == "inf" || t.text == "infinity")) {
    cur.next();
    return {kInfinity, false};
  }
  static const std::map<std::string, double> none;
  ExprParser ex(cur, none);
  return {ex.expr(), false};
}

void interval(Cursor &cur, UntilTemplate &u) {
  if (cur.accept("<=")) {
    u.lower = {0.0, false};
    u.upper = bound(cur);
    return;
  }
  if (cur.accept("[")) u.lower_open = false;
  else if (cur.accept("(")) u.lower_open = true;
  else cur.fail("expected a time interval");
  u.lower = bound(cur);
  cur.expect(",");
  u.upper = bound(cur);
  if (cur.accept("]")) u.upper_open = false;
  else if (cur.accept(")")) u.upper_open = true;
  else cur.fail("expected ']' or ')'");
}

UntilTemplate path(Cursor &cur) {
  UntilTemplate u;
  if (cur.is_word("F") && (cur.is("[", 1) || cur.is("(", 1) || cur.is("<=", 1))) {
    cur.next();
    interval(cur, u);
    u.phi2 = formula(cur);
    return u;
  }
  u.phi1 = formula(cur);
  if (!cur.is_word("U")) cur.fail("expected 'U'");
  cur.next();
  if (cur.is("[") || cur.is("(") || cur.is("<=")) interval(cur, u);
  u.phi2 = formula(cur);
  return u;
}

double number(Cursor &cur) {
  const Token &t = cur.peek();
  if (t.kind != Tok::Number) cur.fail("expected a number");
  return *to_number(cur.next().text);
}

PropertyTemplate::Term probability_term(Cursor &cur, double sign) {
  PropertyTemplate::Term term;
  term.coefficient = sign;
  if (cur.peek().kind == Tok::Number) {
    term.coefficient *= number(cur);
    cur.expect("*");
  }
  if (!cur.is_word("P")) cur.fail("expected 'P=?'");
  cur.next();
  cur.expect("=");
  cur.expect("?");
  cur.expect("[");
  term.until = path(cur);
  cur.expect("]");
  while (cur.is("/") || cur.is("*")) {
    const bool divide = cur.next().text == "/";
    const double v = number(cur);
    if (divide && v == 0.0) cur.fail("division by zero");
    term.coefficient = divide ? term.coefficient / v : term.coefficient * v;
  }
  return term;
}

}  // namespace

StateFormula parse_state_formula(const std::string &text) {
  Cursor cur(lex(text, false));
  StateFormula f = formula(cur);
  if (cur.peek().kind != Tok::End) cur.fail("trailing input");
  return f;
}

UntilProperty UntilTemplate::at(double t) const {
  UntilProperty p{phi1, phi2, {lower.at(t), upper.at(t), lower_open, upper_open}};
  return p;
}

PropertyExpr PropertyTemplate::at(double t) const {
  PropertyExpr e;
  for (const auto &term : terms) e.terms.push_back({term.coefficient, term.until.at(t)});
  return e;
}

PropertyTemplate parse_property(const std::string &text) {
  Cursor cur(lex(text, false));
  PropertyTemplate out;
  out.text = trim(text);
  if (cur.peek().kind == Tok::Ident && cur.is(":", 1) && !cur.is_word("P")) {
    out.name = cur.next().text;
    cur.next();
  }
  double sign = cur.accept("-") ? -1.0 : 1.0;
  out.terms.push_back(probability_term(cur, sign));
  for (;;) {
    if (cur.accept("+")) sign = 1.0;
    else if (cur.accept("-")) sign = -1.0;
    else break;
    out.terms.push_back(probability_term(cur, sign));
  }
  if (cur.peek().kind != Tok::End) cur.fail("trailing input");
  return out;
}

std::vector<PropertyTemplate> parse_property_file(const std::string &text) {
  std::vector<PropertyTemplate> out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string row = trim(raw);
    if (row.empty() || row[0] == '#' || row.rfind("//", 0) == 0) continue;
    try {
      out.push_back(parse_property(row));
    } catch (const Error &e) {
      throw Error(e.kind(), "property line " + std::to_string(line) + ": " + e.what());
    }
    if (out.back().name.empty()) out.back().name = "P" + std::to_string(out.size());
  }
  if (out.empty()) fail_validation("no properties found");
  return out;
}

}  // namespace omni
