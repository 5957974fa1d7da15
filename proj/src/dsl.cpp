#include "scenu/dsl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "scenu/json_io.hpp"
#include "scenu/temporal.hpp"

namespace scenu {

std::string to_string(const Diagnostic& d) {
  return std::to_string(d.line) + ":" + std::to_string(d.column) + ": " + d.message;
}

namespace {

// ---------------------------------------------------------------------------
// Lexing

enum class Tok { Word, String, LParen, RParen, LBracket, RBracket, Comma, Equals };

struct Token {
  Tok kind;
  std::string text;
  int col;
};

struct Fail {
  int col;
  std::string msg;
};

bool is_word_char(char c) {
  return c != '\0' && !std::isspace(static_cast<unsigned char>(c)) && std::strchr("()[],=\"", c) == nullptr;
}

std::optional<double> to_number(std::string_view s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::vector<Token> tokenize(std::string_view s, int col0) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    const int col = col0 + static_cast<int>(i);
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '"') {
      std::string text;
      ++i;
      bool closed = false;
      while (i < s.size()) {
        char ch = s[i++];
        if (ch == '"') {
          closed = true;
          break;
        }
        if (ch == '\\') {
          if (i >= s.size()) break;
          const char e = s[i++];
          switch (e) {
            case 'n': ch = '\n'; break;
            case 't': ch = '\t'; break;
            case '"': ch = '"'; break;
            case '\\': ch = '\\'; break;
            default: throw Fail{col0 + static_cast<int>(i) - 2, std::string("unknown escape '\\") + e + "'"};
          }
        }
        text.push_back(ch);
      }
      if (!closed) throw Fail{col, "unterminated string"};
      out.push_back({Tok::String, std::move(text), col});
      continue;
    }
    const char* punct = "()[],=";
    if (const char* p = std::strchr(punct, c); p && c != '\0') {
      static constexpr Tok kinds[] = {Tok::LParen, Tok::RParen, Tok::LBracket, Tok::RBracket, Tok::Comma, Tok::Equals};
      out.push_back({kinds[p - punct], std::string(1, c), col});
      ++i;
      continue;
    }
    if (!is_word_char(c)) throw Fail{col, "unexpected character"};
    std::size_t j = i;
    while (j < s.size() && is_word_char(s[j])) ++j;
    std::string word(s.substr(i, j - i));
    if (word == "other" && j < s.size() && s[j] == '(') {
      const std::size_t close = s.find(')', j);
      if (close == std::string_view::npos) throw Fail{col, "unterminated other(...)"};
      word = std::string(s.substr(i, close + 1 - i));
      j = close + 1;
    }
    out.push_back({Tok::Word, std::move(word), col});
    i = j;
  }
  return out;
}

const char* tok_name(Tok k) {
  switch (k) {
    case Tok::Word: return "word";
    case Tok::String: return "string";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Equals: return "'='";
  }
  return "token";
}

class Cursor {
 public:
  Cursor(std::vector<Token> toks, int end_col) : toks_(std::move(toks)), end_col_(end_col) {}

  bool done() const { return pos_ >= toks_.size(); }
  const Token* peek(std::size_t ahead = 0) const {
    return pos_ + ahead < toks_.size() ? &toks_[pos_ + ahead] : nullptr;
  }
  int col() const { return done() ? end_col_ : toks_[pos_].col; }

  [[noreturn]] void fail(const std::string& msg) const { throw Fail{col(), msg}; }

  const Token& take(Tok kind, const std::string& what) {
    if (done()) fail("expected " + what + " before end of line");
    if (toks_[pos_].kind != kind) fail("expected " + what + ", got " + describe(toks_[pos_]));
    return toks_[pos_++];
  }

  std::string word(const std::string& what) { return take(Tok::Word, what).text; }

  // Identifier or quoted string.
  std::string name(const std::string& what) {
    if (!done() && (toks_[pos_].kind == Tok::Word || toks_[pos_].kind == Tok::String)) return toks_[pos_++].text;
    if (done()) fail("expected " + what + " before end of line");
    fail("expected " + what + ", got " + describe(toks_[pos_]));
  }

  std::pair<std::string, int> name_at(const std::string& what) {
    const int c = col();
    return {name(what), c};
  }

  std::string str(const std::string& what) { return take(Tok::String, what).text; }

  double number(const std::string& what) {
    if (done()) fail("expected " + what + " before end of line");
    const Token& t = toks_[pos_];
    if (t.kind != Tok::Word) fail("expected " + what + ", got " + describe(t));
    auto v = to_number(t.text);
    if (!v) fail("expected " + what + ", got '" + t.text + "'");
    ++pos_;
    return *v;
  }

  void unit(Unit u) {
    const std::string want(to_string(u));
    if (done() || toks_[pos_].kind != Tok::Word || to_number(toks_[pos_].text)) {
      fail("missing unit (expected " + want + ")");
    }
    const Token& t = toks_[pos_];
    if (t.text != want) {
      if (parse_enum<Unit>(t.text)) fail("unit mismatch: expected " + want + ", got " + t.text);
      fail("expected unit " + want + ", got '" + t.text + "'");
    }
    ++pos_;
  }

  Unit any_unit() {
    if (done() || toks_[pos_].kind != Tok::Word) fail("missing unit");
    auto u = parse_enum<Unit>(toks_[pos_].text);
    if (!u) fail("unknown unit '" + toks_[pos_].text + "'");
    ++pos_;
    return *u;
  }

  double quantity(Unit u, const std::string& what) {
    const double v = number(what);
    unit(u);
    return v;
  }

  Vec3 tuple3(Unit u, const std::string& what) {
    take(Tok::LParen, "'(' opening " + what);
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
      if (i > 0) take(Tok::Comma, "','");
      v[i] = number("number");
    }
    take(Tok::RParen, "')'");
    unit(u);
    return v;
  }

  // [a, b] with no unit (header form).
  Interval bare_interval() {
    take(Tok::LBracket, "'['");
    Interval iv;
    iv.start = number("interval start");
    take(Tok::Comma, "','");
    iv.end = number("interval end");
    take(Tok::RBracket, "']'");
    return iv;
  }

  Interval interval_s() {
    Interval iv = bare_interval();
    unit(Unit::Second);
    return iv;
  }

  bool peek_named(const std::string& key) const {
    const Token* a = peek();
    const Token* b = peek(1);
    return a && b && a->kind == Tok::Word && a->text == key && b->kind == Tok::Equals;
  }

  bool peek_word(const std::string& w) const {
    const Token* a = peek();
    return a && a->kind == Tok::Word && a->text == w;
  }

  void named(const std::string& key) {
    if (!peek_named(key)) fail("expected '" + key + "='");
    pos_ += 2;
  }

  template <class E>
  Term<E> term(const std::string& what) {
    const int c = col();
    const std::string w = word(what);
    auto t = Term<E>::parse(w);
    if (!t) throw Fail{c, "unknown " + what + " '" + w + "'"};
    return *t;
  }

  template <class E>
  E enumv(const std::string& what) {
    const int c = col();
    const std::string w = word(what);
    auto e = parse_enum<E>(w);
    if (!e) throw Fail{c, "unknown " + what + " '" + w + "'"};
    return *e;
  }

  void end() {
    if (!done()) fail("unexpected " + describe(toks_[pos_]));
  }

 private:
  static std::string describe(const Token& t) {
    if (t.kind == Tok::Word) return "'" + t.text + "'";
    if (t.kind == Tok::String) return "string";
    return tok_name(t.kind);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int end_col_;
};

// ---------------------------------------------------------------------------
// UTF-8

// Returns the byte offset of the first invalid sequence, or npos.
std::size_t invalid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = s[i];
    std::size_t n = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      n = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      n = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      n = 3;
      cp = c & 0x07;
    } else {
      return i;
    }
    for (std::size_t k = 1; k <= n; ++k) {
      if (i + k >= s.size()) return i;
      const unsigned char cc = s[i + k];
      if ((cc & 0xC0) != 0x80) return i;
      cp = (cp << 6) | (cc & 0x3F);
    }
    const bool overlong = (n == 1 && cp < 0x80) || (n == 2 && cp < 0x800) || (n == 3 && cp < 0x10000);
    if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return i;
    i += n + 1;
  }
  return std::string_view::npos;
}

// ---------------------------------------------------------------------------
// Document parser

enum class Tag { Scenario, Layer, Rule, Driver, Modality, Element, Sem, Spat, Temp, Phys, Anticipate, ActionTag };

const std::map<std::string, Tag>& tags() {
  static const std::map<std::string, Tag> m{
      {"SCENARIO", Tag::Scenario}, {"LAYER", Tag::Layer},           {"RULE", Tag::Rule},
      {"DRIVER", Tag::Driver},     {"MODALITY", Tag::Modality},     {"ELEMENT", Tag::Element},
      {"SEM", Tag::Sem},           {"SPAT", Tag::Spat},             {"TEMP", Tag::Temp},
      {"PHYS", Tag::Phys},         {"ANTICIPATE", Tag::Anticipate}, {"ACTION", Tag::ActionTag},
  };
  return m;
}

struct Ref {
  std::string id;
  int line;
  int col;
};

class DocumentParser {
 public:
  ParseResult run(std::string_view text) {
    ParseResult result;
    if (auto bad = invalid_utf8(text); bad != std::string_view::npos) {
      int line = 1, col = 1;
      for (std::size_t i = 0; i < bad; ++i) {
        if (text[i] == '\n') {
          ++line;
          col = 1;
        } else {
          ++col;
        }
      }
      result.errors.push_back({line, col, "invalid UTF-8"});
      return result;
    }

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t nl = text.find('\n', pos);
      std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      ++line_no;
      handle_line(line, line_no);
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
    }
    close_block();
    finish();

    if (!errors_.empty()) {
      std::stable_sort(errors_.begin(), errors_.end(), [](const Diagnostic& a, const Diagnostic& b) {
        return std::tie(a.line, a.column) < std::tie(b.line, b.column);
      });
      result.errors = std::move(errors_);
      return result;
    }
    cand_.warnings = std::move(warnings_);
    result.value = std::move(cand_);
    return result;
  }

 private:
  void error(int line, int col, std::string msg) { errors_.push_back({line, std::max(1, col), std::move(msg)}); }

  void handle_line(std::string_view raw, int line_no) {
    line_ = line_no;
    line_len_ = static_cast<int>(raw.size());
    std::size_t first = 0;
    while (first < raw.size() && (raw[first] == ' ' || raw[first] == '\t' || raw[first] == '\r')) ++first;
    if (first == raw.size() || raw[first] == '#') return;
    try {
      if (raw[first] == '[') {
        header(raw, first);
      } else {
        entry(raw, first);
      }
    } catch (const Fail& f) {
      error(line_no, std::min(f.col, std::max(1, line_len_)), f.msg);
    }
  }

  int end_col() const { return std::max(1, line_len_); }

  // ---- headers

  void header(std::string_view raw, std::size_t first) {
    close_block();
    const std::size_t close = raw.find(']', first);
    const int tag_col = static_cast<int>(first) + 2;
    if (close == std::string_view::npos) throw Fail{static_cast<int>(first) + 1, "unterminated block tag"};
    std::string name(raw.substr(first + 1, close - first - 1));
    auto it = tags().find(name);
    if (it == tags().end()) throw Fail{tag_col, "unknown block tag '" + name + "'"};
    block_ = it->second;
    block_ok_ = false;
    have_block_ = true;
    block_line_ = line_;
    seen_keys_.clear();

    Cursor cur(tokenize(raw.substr(close + 1), static_cast<int>(close) + 2), end_col());
    std::optional<std::pair<std::string, int>> subject;
    if (!cur.done() && !cur.peek_word("@")) subject = cur.name_at("block subject");
    std::optional<double> t;
    std::optional<Interval> iv;
    int time_col = cur.col();
    if (cur.peek_word("@")) {
      cur.word("'@'");
      time_col = cur.col();
      cur.named("t");
      if (cur.peek() && cur.peek()->kind == Tok::LBracket) {
        iv = cur.bare_interval();
      } else {
        t = cur.number("time");
      }
    }
    cur.end();

    auto need_subject = [&](const char* what) -> std::pair<std::string, int> {
      if (!subject) throw Fail{end_col(), std::string("[") + name + "] needs " + what};
      return *subject;
    };
    auto no_time = [&] {
      if (t || iv) throw Fail{time_col, "[" + name + "] takes no time"};
    };
    auto snapshot = [&]() -> double {
      if (iv) throw Fail{time_col, "[" + name + "] takes a snapshot time t=<number>, not an interval"};
      if (!t) throw Fail{end_col(), "[" + name + "] needs '@ t=<number>'"};
      return *t;
    };
    auto interval = [&]() -> Interval {
      if (t) throw Fail{time_col, "[" + name + "] takes an interval t=[a, b], not a snapshot time"};
      if (!iv) throw Fail{end_col(), "[" + name + "] needs '@ t=[a, b]'"};
      return *iv;
    };
    auto unique_block = [&](const std::string& elem, double a, double b) {
      if (!blocks_.emplace(name, elem, a, b).second) {
        throw Fail{static_cast<int>(first) + 1, "duplicate [" + name + "] block for '" + elem + "'"};
      }
    };

    auto& d = cand_.description;
    switch (block_) {
      case Tag::Scenario:
        no_time();
        unique_block("", 0, 0);
        d.id = subject ? subject->first : "";
        break;
      case Tag::Layer: {
        no_time();
        const auto [s, c] = need_subject("a layer number");
        auto n = to_number(s);
        if (!n || *n != std::floor(*n) || std::abs(*n) > 1e6) throw Fail{c, "layer must be an integer"};
        layer_ = static_cast<int>(*n);
        d.context.layers[layer_];
        break;
      }
      case Tag::Rule:
        no_time();
        d.context.rules.push_back({need_subject("a rule id").first, RuleKind::Traffic, {}});
        break;
      case Tag::Driver:
        no_time();
        if (subject) throw Fail{subject->second, "[DRIVER] takes no subject"};
        break;
      case Tag::Modality:
        no_time();
        d.modalities.push_back({ModalityKind::Visual, need_subject("a source label").first, {}});
        break;
      case Tag::Element: {
        no_time();
        const auto [id, c] = need_subject("an element id");
        unique_block(id, 0, 0);
        element_ = ensure_element(id);
        break;
      }
      case Tag::Sem: {
        const auto [id, c] = need_subject("an element id");
        const double at = snapshot();
        unique_block(id, at, at);
        ensure_element(id);
        SemanticAnnotation a;
        a.element_id = id;
        a.t = at;
        d.semantic.push_back(a);
        break;
      }
      case Tag::Spat: {
        const auto [id, c] = need_subject("an element id");
        const double at = snapshot();
        unique_block(id, at, at);
        ensure_element(id);
        SpatialAnnotation a;
        a.element_id = id;
        a.t = at;
        d.spatial.push_back(a);
        break;
      }
      case Tag::Temp: {
        const auto [id, c] = need_subject("an element id");
        const Interval span = interval();
        unique_block(id, span.start, span.end);
        ensure_element(id);
        TemporalAnnotation a;
        a.element_id = id;
        a.interval = span;
        d.temporal.push_back(a);
        break;
      }
      case Tag::Phys: {
        const auto [id, c] = need_subject("an element id");
        const Interval span = interval();
        unique_block(id, span.start, span.end);
        ensure_element(id);
        PhysicalAnnotation a;
        a.element_id = id;
        a.interval = span;
        d.physical.push_back(a);
        break;
      }
      case Tag::Anticipate: {
        const auto [base, c] = need_subject("a base scenario id");
        const Interval span = interval();
        unique_block("", 0, 0);
        if (span.start != 0.0) throw Fail{time_col, "anticipation interval must start at 0"};
        cand_.anticipation = ScenarioAnticipation{};
        cand_.anticipation->base = base;
        cand_.anticipation->horizon = span.end;
        break;
      }
      case Tag::ActionTag: {
        no_time();
        const auto [task, c] = need_subject("a task kind");
        auto k = parse_enum<TaskKind>(task);
        if (!k) throw Fail{c, "unknown task kind '" + task + "'"};
        Action a;
        a.task = *k;
        cand_.actions.push_back(a);
        break;
      }
    }
    block_ok_ = true;
  }

  // Required keys are checked when the block ends.
  void close_block() {
    if (!block_ok_) return;
    block_ok_ = false;
    auto require = [&](const char* key) {
      if (!seen_keys_.count(key)) error(block_line_, 1, std::string("block is missing required key '") + key + "'");
    };
    switch (block_) {
      case Tag::Sem: require("class"); break;
      case Tag::Phys: require("model"); break;
      case Tag::Rule: require("kind"); break;
      case Tag::Modality: require("kind"); break;
      case Tag::ActionTag: require("verb"); break;
      default: break;
    }
  }

  std::size_t ensure_element(const std::string& id) {
    auto& els = cand_.description.elements;
    for (std::size_t i = 0; i < els.size(); ++i) {
      if (els[i].id == id) return i;
    }
    els.push_back({id, {}});
    known_.insert(id);
    return els.size() - 1;
  }

  void ref(const std::string& id, int col) { refs_.push_back({id, line_, col}); }

  // ---- entries

  void entry(std::string_view raw, std::size_t first) {
    const std::size_t colon = raw.find(':', first);
    const int key_col = static_cast<int>(first) + 1;
    if (colon == std::string_view::npos) throw Fail{key_col, "expected 'key: value'"};
    std::string key(raw.substr(first, colon - first));
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    if (key.empty() || !std::all_of(key.begin(), key.end(), [](char c) {
          return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        })) {
      throw Fail{key_col, "expected 'key: value'"};
    }
    if (!block_ok_) {
      if (!have_block_) throw Fail{key_col, "entry outside any block"};
      return;  // header failed; its entries are skipped
    }
    Cursor cur(tokenize(raw.substr(colon + 1), static_cast<int>(colon) + 2), end_col());
    if (!dispatch(key, cur, key_col)) {
      warnings_.push_back({line_, key_col, "unknown key '" + key + "' ignored"});
      return;
    }
    cur.end();
  }

  void once(const std::string& key, int col) {
    if (!seen_keys_.insert(key).second) throw Fail{col, "duplicate key '" + key + "'"};
  }

  Param param_value(Cursor& cur) {
    const Token* t = cur.peek();
    if (t && t->kind == Tok::String) return cur.str("string");
    if (t && t->kind == Tok::Word && to_number(t->text)) {
      Quantity q;
      q.value = cur.number("number");
      q.unit = cur.any_unit();
      return q;
    }
    return cur.word("parameter value");
  }

  void params(Cursor& cur, Parameters& out) {
    while (!cur.done()) {
      const int c = cur.col();
      const std::string k = cur.word("parameter name");
      if (!cur.peek() || cur.peek()->kind != Tok::Equals) throw Fail{cur.col(), "expected '=' after '" + k + "'"};
      cur.take(Tok::Equals, "'='");
      if (out.count(k)) throw Fail{c, "duplicate parameter '" + k + "'"};
      out[k] = param_value(cur);
    }
  }

  StateSample sample(Cursor& cur) {
    StateSample s;
    cur.named("t");
    s.t = cur.quantity(Unit::Second, "time");
    cur.named("pos");
    s.position = cur.tuple3(Unit::Meter, "position");
    cur.named("rot");
    const Vec3 rpy = cur.tuple3(Unit::Radian, "orientation");
    s.orientation = rotation_from_rpy(rpy.x(), rpy.y(), rpy.z());
    cur.named("speed");
    s.speed = cur.quantity(Unit::MeterPerSecond, "speed");
    if (cur.peek_named("yaw_rate")) {
      cur.named("yaw_rate");
      s.yaw_rate = cur.quantity(Unit::RadianPerSecond, "yaw rate");
    }
    return s;
  }

  bool dispatch(const std::string& key, Cursor& cur, int key_col) {
    auto& d = cand_.description;
    switch (block_) {
      case Tag::Scenario:
        if (key == "window") {
          once(key, key_col);
          d.window = cur.interval_s();
          have_window_ = true;
        } else if (key == "ego") {
          once(key, key_col);
          d.ego_id = cur.name("ego id");
        } else {
          return false;
        }
        return true;

      case Tag::Layer:
        if (key != "entry") return false;
        {
          LayerEntry e;
          e.id = cur.name("entry id");
          e.kind = cur.name("entry kind");
          e.label = cur.str("quoted label");
          d.context.layers[layer_].push_back(e);
        }
        return true;

      case Tag::Rule: {
        Rule& r = d.context.rules.back();
        if (key == "kind") {
          once(key, key_col);
          r.kind = cur.enumv<RuleKind>("rule kind");
        } else if (key == "param") {
          params(cur, r.params);
        } else {
          return false;
        }
        return true;
      }

      case Tag::Driver:
        if (key != "say") return false;
        {
          Utterance u;
          cur.named("t");
          u.t = cur.quantity(Unit::Second, "time");
          u.text = cur.str("quoted text");
          d.context.driver_channel.push_back(u);
        }
        return true;

      case Tag::Modality: {
        ModalityStream& m = d.modalities.back();
        if (key == "kind") {
          once(key, key_col);
          m.kind = cur.enumv<ModalityKind>("modality kind");
        } else if (key == "sample") {
          ModalitySample s;
          cur.named("t");
          s.t = cur.quantity(Unit::Second, "time");
          cur.named("ref");
          s.ref = cur.name("payload reference");
          m.samples.push_back(s);
        } else {
          return false;
        }
        return true;
      }

      case Tag::Element:
        if (key != "sample") return false;
        d.elements[element_].trajectory.push_back(sample(cur));
        return true;

      case Tag::Sem: {
        SemanticAnnotation& a = d.semantic.back();
        if (key == "id") {
          once(key, key_col);
          a.id = cur.name("annotation id");
        } else if (key == "class") {
          once(key, key_col);
          a.class_ = cur.term<ElementClass>("class");
        } else if (key == "state") {
          once(key, key_col);
          a.state = cur.term<MotionState>("state");
        } else if (key == "attribute") {
          a.attributes.push_back(cur.str("quoted attribute"));
        } else if (key == "affordance") {
          a.affordances.push_back(cur.term<Affordance>("affordance"));
        } else {
          return false;
        }
        return true;
      }

      case Tag::Spat: {
        SpatialAnnotation& a = d.spatial.back();
        if (key == "id") {
          once(key, key_col);
          a.id = cur.name("annotation id");
        } else if (key == "position") {
          once(key, key_col);
          a.position = cur.tuple3(Unit::Meter, "position");
        } else if (key == "orientation") {
          once(key, key_col);
          const Vec3 rpy = cur.tuple3(Unit::Radian, "orientation");
          a.orientation = rotation_from_rpy(rpy.x(), rpy.y(), rpy.z());
        } else if (key == "distance_to_ego") {
          once(key, key_col);
          a.distance_to_ego = cur.quantity(Unit::Meter, "distance");
        } else if (key == "occupancy") {
          once(key, key_col);
          const Vec3 e = cur.tuple3(Unit::Meter, "extent");
          a.occupancy = Extent{e.x(), e.y(), e.z()};
        } else if (key == "relation") {
          TopologyEntry r;
          r.relation = cur.term<Relation>("relation");
          auto [other, c] = cur.name_at("element id");
          r.other = other;
          ref(other, c);
          a.topology.push_back(r);
        } else {
          return false;
        }
        return true;
      }

      case Tag::Temp: {
        TemporalAnnotation& a = d.temporal.back();
        if (key == "id") {
          once(key, key_col);
          a.id = cur.name("annotation id");
        } else if (key == "velocity") {
          TimedVec v;
          cur.named("t");
          v.t = cur.quantity(Unit::Second, "time");
          cur.named("v");
          v.value = cur.tuple3(Unit::MeterPerSecond, "velocity");
          a.velocity.push_back(v);
        } else if (key == "acceleration") {
          TimedVec v;
          cur.named("t");
          v.t = cur.quantity(Unit::Second, "time");
          cur.named("a");
          v.value = cur.tuple3(Unit::MeterPerSecond2, "acceleration");
          a.acceleration.push_back(v);
        } else if (key == "state") {
          StateInterval s;
          s.interval = cur.interval_s();
          s.state = cur.term<MotionState>("state");
          a.state_sequence.push_back(s);
        } else if (key == "visibility") {
          VisibilityInterval v;
          v.interval = cur.interval_s();
          v.visibility = cur.enumv<Visibility>("visibility");
          if (cur.peek_word("passive")) {
            cur.word("passive");
            v.passive = true;
          }
          if (cur.peek_named("cause")) {
            cur.named("cause");
            auto [id, c] = cur.name_at("element id");
            v.cause = id;
            ref(id, c);
          }
          a.visibility.push_back(v);
        } else if (key == "ordering") {
          OrderingEntry o;
          o.relation = cur.term<Ordering>("ordering");
          auto [other, c] = cur.name_at("element id");
          o.other = other;
          ref(other, c);
          a.orderings.push_back(o);
        } else if (key == "period") {
          once(key, key_col);
          a.periodicity = cur.quantity(Unit::Second, "period");
        } else {
          return false;
        }
        return true;
      }

      case Tag::Phys: {
        PhysicalAnnotation& a = d.physical.back();
        if (key == "id") {
          once(key, key_col);
          a.id = cur.name("annotation id");
        } else if (key == "model") {
          once(key, key_col);
          a.model = cur.term<PhysicalModel>("physical model");
        } else if (key == "material") {
          a.material_tags.push_back(cur.name("material tag"));
        } else if (key == "constraint") {
          Constraint c;
          c.id = cur.name("constraint id");
          c.kind = cur.enumv<ConstraintKind>("constraint kind");
          params(cur, c.params);
          a.constraints.push_back(c);
        } else if (key == "violation") {
          ViolationRecord v;
          v.constraint_id = cur.name("constraint id");
          cur.named("t");
          v.t = cur.quantity(Unit::Second, "time");
          cur.named("value");
          v.measured.value = cur.number("measured value");
          v.measured.unit = cur.any_unit();
          a.violations.push_back(v);
        } else {
          return false;
        }
        return true;
      }

      case Tag::Anticipate: {
        ScenarioAnticipation& an = *cand_.anticipation;
        if (key == "track") {
          PredictedTrack tr;
          auto [id, c] = cur.name_at("element id");
          tr.element_id = id;
          ref(id, c);
          tr.model = cur.term<PhysicalModel>("physical model");
          if (cur.peek_word("fallback")) {
            cur.word("fallback");
            tr.fallback = true;
          }
          for (const auto& existing : an.tracks) {
            if (existing.element_id == id) throw Fail{c, "duplicate track for '" + id + "'"};
          }
          an.tracks.push_back(tr);
        } else if (key == "predict") {
          auto [id, c] = cur.name_at("element id");
          PredictedTrack* tr = nullptr;
          for (auto& x : an.tracks) {
            if (x.element_id == id) tr = &x;
          }
          if (!tr) throw Fail{c, "predict for '" + id + "' before its track line"};
          tr->samples.push_back(sample(cur));
        } else if (key == "event") {
          PredictedEvent e;
          cur.named("t");
          e.t = cur.quantity(Unit::Second, "time");
          e.tag = cur.enumv<EventTag>("event tag");
          while (!cur.done() && !cur.peek_named("detail")) {
            auto [id, c] = cur.name_at("element id");
            e.elements.push_back(id);
            ref(id, c);
          }
          if (cur.peek_named("detail")) {
            cur.named("detail");
            e.detail = cur.name("detail");
          }
          an.events.push_back(e);
        } else if (key == "delta") {
          RelationDelta r;
          cur.named("t");
          r.t = cur.quantity(Unit::Second, "time");
          auto [id, c] = cur.name_at("element id");
          r.element_id = id;
          ref(id, c);
          const int cc = cur.col();
          const std::string change = cur.word("'added' or 'removed'");
          if (change != "added" && change != "removed") throw Fail{cc, "expected 'added' or 'removed'"};
          r.added = change == "added";
          r.relation = cur.term<Relation>("relation");
          auto [other, oc] = cur.name_at("element id");
          r.other = other;
          ref(other, oc);
          an.relations.push_back(r);
        } else {
          return false;
        }
        return true;
      }

      case Tag::ActionTag: {
        Action& act = cand_.actions.back();
        if (key == "verb") {
          once(key, key_col);
          act.verb = cur.enumv<ActionVerb>("action verb");
        } else if (key == "because") {
          while (!cur.done()) act.justification.push_back(cur.name("annotation reference"));
        } else {
          return false;
        }
        return true;
      }
    }
    return false;
  }

  void finish() {
    auto& d = cand_.description;
    if (d.ego_id.empty() && !known_.count("ego") &&
        std::any_of(refs_.begin(), refs_.end(), [](const Ref& r) { return r.id == "ego"; })) {
      d.ego_id = "ego";
    }
    if (!d.ego_id.empty()) ensure_element(d.ego_id);
    for (const auto& r : refs_) {
      if (!known_.count(r.id)) error(r.line, r.col, "unknown element '" + r.id + "'");
    }
    if (!have_window_) {
      double lo = 0.0;
      for (const auto& e : d.elements) {
        for (const auto& s : e.trajectory) lo = std::min(lo, s.t);
      }
      for (const auto& a : d.semantic) lo = std::min(lo, a.t);
      for (const auto& a : d.spatial) lo = std::min(lo, a.t);
      for (const auto& a : d.temporal) lo = std::min(lo, a.interval.start);
      for (const auto& a : d.physical) lo = std::min(lo, a.interval.start);
      d.window = {lo, 0.0};
    }
  }

  Candidate cand_;
  std::vector<Diagnostic> errors_;
  std::vector<Diagnostic> warnings_;
  std::vector<Ref> refs_;
  std::set<std::string> known_;
  std::set<std::tuple<std::string, std::string, double, double>> blocks_;
  std::set<std::string> seen_keys_;
  Tag block_ = Tag::Scenario;
  bool block_ok_ = false;
  bool have_block_ = false;
  bool have_window_ = false;
  int block_line_ = 0;
  int layer_ = 0;
  std::size_t element_ = 0;
  int line_ = 0;
  int line_len_ = 0;
};

// ---------------------------------------------------------------------------
// Serializer

bool plain_word(const std::string& s) {
  if (s.empty() || s == "@" || s == "other" || s[0] == '#') return false;
  return std::all_of(s.begin(), s.end(), is_word_char);
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string name_text(const std::string& s) { return plain_word(s) ? s : quote(s); }

std::string num(double v) { return format_number(v); }

// Shortest text that parses back to the same double; logs carry raw samples.
std::string exact_num(double v) {
  if (v == 0.0) v = 0.0;
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string tuple_text(const Vec3& v, const char* unit) {
  return "(" + num(v.x()) + ", " + num(v.y()) + ", " + num(v.z()) + ") " + unit;
}

std::string rot_text(const Mat3& r) { return tuple_text(rpy_from_rotation(r), "rad"); }

std::string interval_text(const Interval& iv) { return "[" + num(iv.start) + ", " + num(iv.end) + "]"; }

std::string param_text(const Param& p) {
  if (const auto* q = std::get_if<Quantity>(&p)) return quantity_text(*q);
  return quote(std::get<std::string>(p));
}

std::string params_text(const Parameters& ps) {
  std::string out;
  for (const auto& [k, v] : ps) out += " " + k + "=" + param_text(v);
  return out;
}

std::string sample_text(const StateSample& s) {
  std::string out = "t=" + num(s.t) + " s pos=" + tuple_text(s.position, "m") + " rot=" + rot_text(s.orientation) +
                    " speed=" + num(s.speed) + " m/s";
  if (s.yaw_rate) out += " yaw_rate=" + num(*s.yaw_rate) + " rad/s";
  return out;
}

}  // namespace

ParseResult parse_annotation_text(std::string_view text) {
  DocumentParser p;
  return p.run(text);
}

std::string serialize(const ScenarioDescription& in, const ScenarioAnticipation* ant, const std::vector<Action>* actions) {
  const ScenarioDescription d = canonicalize(in);
  std::ostringstream o;
  o << "[SCENARIO]";
  if (!d.id.empty()) o << " " << name_text(d.id);
  o << "\nwindow: " << interval_text(d.window) << " s\n";
  if (!d.ego_id.empty()) o << "ego: " << name_text(d.ego_id) << "\n";

  for (const auto& [layer, entries] : d.context.layers) {
    o << "\n[LAYER] " << layer << "\n";
    for (const auto& e : entries) {
      o << "entry: " << name_text(e.id) << " " << name_text(e.kind) << " " << quote(e.label) << "\n";
    }
  }
  for (const auto& r : d.context.rules) {
    o << "\n[RULE] " << name_text(r.id) << "\nkind: " << to_string(r.kind) << "\n";
    for (const auto& [k, v] : r.params) o << "param: " << k << "=" << param_text(v) << "\n";
  }
  if (!d.context.driver_channel.empty()) {
    o << "\n[DRIVER]\n";
    for (const auto& u : d.context.driver_channel) o << "say: t=" << num(u.t) << " s " << quote(u.text) << "\n";
  }
  for (const auto& m : d.modalities) {
    o << "\n[MODALITY] " << name_text(m.source) << "\nkind: " << to_string(m.kind) << "\n";
    for (const auto& s : m.samples) o << "sample: t=" << num(s.t) << " s ref=" << name_text(s.ref) << "\n";
  }
  for (const auto& e : d.elements) {
    o << "\n[ELEMENT] " << name_text(e.id) << "\n";
    for (const auto& s : e.trajectory) o << "sample: " << sample_text(s) << "\n";
  }
  for (const auto& a : d.semantic) {
    o << "\n[SEM] " << name_text(a.element_id) << " @ t=" << num(a.t) << "\n";
    if (!a.id.empty()) o << "id: " << name_text(a.id) << "\n";
    o << "class: " << a.class_.token() << "\n";
    if (a.state) o << "state: " << a.state->token() << "\n";
    for (const auto& x : a.attributes) o << "attribute: " << quote(x) << "\n";
    for (const auto& x : a.affordances) o << "affordance: " << x.token() << "\n";
  }
  for (const auto& a : d.spatial) {
    o << "\n[SPAT] " << name_text(a.element_id) << " @ t=" << num(a.t) << "\n";
    if (!a.id.empty()) o << "id: " << name_text(a.id) << "\n";
    if (a.position) o << "position: " << tuple_text(*a.position, "m") << "\n";
    if (a.orientation) o << "orientation: " << rot_text(*a.orientation) << "\n";
    if (a.distance_to_ego) o << "distance_to_ego: " << num(*a.distance_to_ego) << " m\n";
    if (a.occupancy) {
      o << "occupancy: " << tuple_text(Vec3(a.occupancy->length, a.occupancy->width, a.occupancy->height), "m") << "\n";
    }
    for (const auto& r : a.topology) o << "relation: " << r.relation.token() << " " << name_text(r.other) << "\n";
  }
  for (const auto& a : d.temporal) {
    o << "\n[TEMP] " << name_text(a.element_id) << " @ t=" << interval_text(a.interval) << "\n";
    if (!a.id.empty()) o << "id: " << name_text(a.id) << "\n";
    for (const auto& v : a.velocity) o << "velocity: t=" << num(v.t) << " s v=" << tuple_text(v.value, "m/s") << "\n";
    for (const auto& v : a.acceleration) {
      o << "acceleration: t=" << num(v.t) << " s a=" << tuple_text(v.value, "m/s^2") << "\n";
    }
    for (const auto& s : a.state_sequence) o << "state: " << interval_text(s.interval) << " s " << s.state.token() << "\n";
    for (const auto& v : a.visibility) {
      o << "visibility: " << interval_text(v.interval) << " s " << to_string(v.visibility);
      if (v.passive) o << " passive";
      if (!v.cause.empty()) o << " cause=" << name_text(v.cause);
      o << "\n";
    }
    for (const auto& x : a.orderings) o << "ordering: " << x.relation.token() << " " << name_text(x.other) << "\n";
    if (a.periodicity) o << "period: " << num(*a.periodicity) << " s\n";
  }
  for (const auto& a : d.physical) {
    o << "\n[PHYS] " << name_text(a.element_id) << " @ t=" << interval_text(a.interval) << "\n";
    if (!a.id.empty()) o << "id: " << name_text(a.id) << "\n";
    o << "model: " << a.model.token() << "\n";
    for (const auto& m : a.material_tags) o << "material: " << name_text(m) << "\n";
    for (const auto& c : a.constraints) {
      o << "constraint: " << name_text(c.id) << " " << to_string(c.kind) << params_text(c.params) << "\n";
    }
    for (const auto& v : a.violations) {
      o << "violation: " << name_text(v.constraint_id) << " t=" << num(v.t) << " s value=" << quantity_text(v.measured)
        << "\n";
    }
  }
  if (ant) {
    const ScenarioAnticipation a = canonicalize(*ant);
    o << "\n[ANTICIPATE] " << name_text(a.base) << " @ t=[0, " << num(a.horizon) << "]\n";
    for (const auto& tr : a.tracks) {
      o << "track: " << name_text(tr.element_id) << " " << tr.model.token() << (tr.fallback ? " fallback" : "") << "\n";
      for (const auto& s : tr.samples) o << "predict: " << name_text(tr.element_id) << " " << sample_text(s) << "\n";
    }
    for (const auto& e : a.events) {
      o << "event: t=" << num(e.t) << " s " << to_string(e.tag);
      for (const auto& el : e.elements) o << " " << name_text(el);
      if (!e.detail.empty()) o << " detail=" << name_text(e.detail);
      o << "\n";
    }
    for (const auto& r : a.relations) {
      o << "delta: t=" << num(r.t) << " s " << name_text(r.element_id) << " " << (r.added ? "added" : "removed") << " "
        << r.relation.token() << " " << name_text(r.other) << "\n";
    }
  }
  if (actions) {
    for (const auto& act : *actions) {
      o << "\n[ACTION] " << to_string(act.task) << "\nverb: " << to_string(act.verb) << "\n";
      if (!act.justification.empty()) {
        o << "because:";
        for (const auto& j : act.justification) o << " " << name_text(j);
        o << "\n";
      }
    }
  }
  return o.str();
}

// ---------------------------------------------------------------------------
// Trajectory log

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

constexpr std::string_view kLogColumns = "t,id,class,x,y,z,yaw,speed";
constexpr std::string_view kColumnNames[] = {"t", "id", "class", "x", "y", "z", "yaw", "speed"};

}  // namespace

std::vector<Element> TrajectoryLog::elements() const {
  std::vector<Element> out;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::vector<double>> yaws;
  for (const auto& r : rows) {
    auto [it, fresh] = index.emplace(r.id, out.size());
    if (fresh) out.push_back({r.id, {}});
    StateSample s;
    s.t = r.t;
    s.position = Vec3(r.x, r.y, r.z);
    s.orientation = rotation_from_yaw(r.yaw);
    s.speed = r.speed;
    out[it->second].trajectory.push_back(s);
    yaws[r.id].push_back(r.yaw);
  }
  for (auto& e : out) {
    auto& y = yaws[e.id];
    if (y.size() < 2) continue;
    std::vector<TimedVec> series;
    double prev = y.front();
    for (std::size_t i = 0; i < y.size(); ++i) {
      double v = y[i];
      if (i > 0) v = prev + std::remainder(y[i] - prev, 2.0 * std::numbers::pi);
      prev = v;
      series.push_back({e.trajectory[i].t, Vec3(v, 0.0, 0.0)});
    }
    const auto rates = differentiate(series);
    for (std::size_t i = 0; i < rates.size(); ++i) {
      const double w = rates[i].value.x();
      e.trajectory[i].yaw_rate = std::abs(w) < 1e-12 ? 0.0 : w;
    }
  }
  return out;
}

std::map<std::string, std::string> TrajectoryLog::class_hints() const {
  std::map<std::string, std::string> out;
  for (const auto& r : rows) out.emplace(r.id, r.class_hint);
  return out;
}

LogParseResult parse_trajectory_log(std::string_view text) {
  LogParseResult res;
  TrajectoryLog log;
  std::vector<Diagnostic> errors;
  if (auto bad = invalid_utf8(text); bad != std::string_view::npos) {
    res.errors.push_back({1, 1, "invalid UTF-8"});
    return res;
  }

  enum class Stage { Meta, Columns, Rows } stage = Stage::Meta;
  bool order_reported = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const int width = std::max<int>(1, static_cast<int>(raw.size()));

    if (stage == Stage::Meta) {
      if (line.front() != '#') {
        errors.push_back({line_no, 1, "expected header '#ego=<id> rate=<hz>'"});
        return {std::nullopt, errors};
      }
      std::istringstream ss{std::string(line.substr(1))};
      std::string part;
      bool have_rate = false, have_ego = false;
      while (ss >> part) {
        const auto eq = part.find('=');
        const std::string k = part.substr(0, eq), v = eq == std::string::npos ? "" : part.substr(eq + 1);
        if (k == "ego") {
          log.ego_id = v;
          have_ego = true;
        } else if (k == "rate") {
          auto r = to_number(v);
          if (!r || !(*r > 0.0)) {
            errors.push_back({line_no, 1, "rate must be a positive number"});
          } else {
            log.rate = *r;
            have_rate = true;
          }
        }
      }
      if (!have_ego) errors.push_back({line_no, 1, "header lacks ego=<id>"});
      if (!have_rate && errors.empty()) errors.push_back({line_no, 1, "header lacks rate=<hz>"});
      stage = Stage::Columns;
      continue;
    }
    if (stage == Stage::Columns) {
      std::string cols;
      for (char c : line) {
        if (!std::isspace(static_cast<unsigned char>(c))) cols.push_back(c);
      }
      if (cols != kLogColumns) {
        errors.push_back({line_no, 1, "expected column line '" + std::string(kLogColumns) + "'"});
        return {std::nullopt, errors};
      }
      stage = Stage::Rows;
      continue;
    }

    std::vector<std::pair<std::string_view, int>> fields;
    std::size_t start = 0;
    const std::size_t offset = static_cast<std::size_t>(line.data() - raw.data());
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view f = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      fields.push_back({trim(f), static_cast<int>(offset + start) + 1});
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 8) {
      errors.push_back({line_no, width,
                        fields.size() < 8 ? "missing columns: expected 8, got " + std::to_string(fields.size())
                                          : "too many columns: expected 8, got " + std::to_string(fields.size())});
      continue;
    }
    TrajectoryRow row;
    bool ok = true;
    auto numeric = [&](int i, double& out) {
      auto v = to_number(fields[i].first);
      if (!v) {
        errors.push_back({line_no, std::min(fields[i].second, width),
                          "non-numeric field '" + std::string(fields[i].first) + "' in column " +
                              std::string(kColumnNames[i])});
        ok = false;
      } else {
        out = *v;
      }
    };
    numeric(0, row.t);
    row.id = std::string(fields[1].first);
    row.class_hint = std::string(fields[2].first);
    if (row.id.empty()) {
      errors.push_back({line_no, std::min(fields[1].second, width), "empty element id"});
      ok = false;
    }
    numeric(3, row.x);
    numeric(4, row.y);
    numeric(5, row.z);
    numeric(6, row.yaw);
    numeric(7, row.speed);
    if (!ok) continue;
    if (!log.rows.empty() && !order_reported) {
      const auto& prev = log.rows.back();
      if (std::tie(row.t, row.id) <= std::tie(prev.t, prev.id)) {
        errors.push_back({line_no, 1, "rows out of order: (t, id) must strictly increase; first offending line"});
        order_reported = true;
      }
    }
    log.rows.push_back(std::move(row));
  }
  if (stage == Stage::Meta) errors.push_back({1, 1, "missing header '#ego=<id> rate=<hz>'"});
  else if (stage == Stage::Columns && errors.empty()) {
    errors.push_back({line_no, 1, "missing column line '" + std::string(kLogColumns) + "'"});
  }
  if (!errors.empty()) return {std::nullopt, errors};
  res.value = std::move(log);
  return res;
}

std::string serialize_log(const TrajectoryLog& log) {
  std::ostringstream o;
  o << "#ego=" << log.ego_id << " rate=" << format_number(log.rate) << "\n" << kLogColumns << "\n";
  for (const auto& r : log.rows) {
    o << format_number(r.t) << "," << r.id << "," << r.class_hint << "," << exact_num(r.x) << ","
      << exact_num(r.y) << "," << exact_num(r.z) << "," << exact_num(r.yaw) << "," << exact_num(r.speed)
      << "\n";
  }
  return o.str();
}

}  // namespace scenu
