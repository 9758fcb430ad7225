#include "strokeppg/noteanchor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ctime>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace strokeppg {

Lexicon default_lexicon() {
  Lexicon lex;
  lex.triggers = {
      "acute ischemic stroke", "acute hemorrhagic stroke", "acute stroke",
      "code stroke", "stroke alert", "acute cva", "cva",
      "acute cerebrovascular accident", "cerebrovascular accident",
      "new onset", "hemiparesis noted", "facial droop noted", "aphasia noted",
      "acute infarct",
  };
  lex.guards = {
      "history of", "hx of", "prior", "old", "previous", "remote", "chronic",
      "resolved", "no evidence of", "no acute", "without acute", "denies",
      "rule out", "ruled out", "negative for",
  };
  lex.anchors = {
      {"this morning", 0, 8, 0},   {"this afternoon", 0, 14, 0},
      {"this evening", 0, 19, 0},  {"last night", -1, 22, 0},
      {"overnight", 0, 2, 0},      {"yesterday morning", -1, 8, 0},
      {"yesterday afternoon", -1, 14, 0}, {"yesterday evening", -1, 19, 0},
  };
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_lexicon: cannot open " + path.string());
  Lexicon lex;
  lex.triggers.clear();
  lex.guards.clear();
  lex.anchors.clear();
  std::string line, section;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    if (line.rfind("version=", 0) == 0) {
      lex.version = line.substr(8);
      continue;
    }
    if (section == "triggers") {
      lex.triggers.push_back(line);
    } else if (section == "guards") {
      lex.guards.push_back(line);
    } else if (section == "anchors") {
      std::istringstream ls(line);
      std::string phrase, d, h, m;
      std::getline(ls, phrase, '|');
      std::getline(ls, d, '|');
      std::getline(ls, h, '|');
      std::getline(ls, m, '|');
      lex.anchors.push_back({phrase, std::stoi(d), std::stoi(h), std::stoi(m)});
    }
  }
  return lex;
}

void save_lexicon(const std::filesystem::path& path, const Lexicon& lex) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_lexicon: cannot open " + path.string());
  out << "# onset extraction lexicon\n";
  out << "version=" << lex.version << "\n";
  out << "[triggers]\n";
  for (const auto& t : lex.triggers) out << t << "\n";
  out << "[guards]\n";
  for (const auto& g : lex.guards) out << g << "\n";
  out << "[anchors]\n";
  for (const auto& [p, d, h, m] : lex.anchors)
    out << p << "|" << d << "|" << h << "|" << m << "\n";
}

namespace {

struct Token {
  std::string text;
  size_t begin = 0, end = 0;
};

std::string normalize(const std::string& text) {
  std::string s = text;
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  // Same-length rewrite of a.m./p.m. so char offsets survive.
  auto patch = [&](const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  patch("a.m.", "am  ");
  patch("p.m.", "pm  ");
  return s;
}

std::vector<Token> tokenize(const std::string& s) {
  std::vector<Token> toks;
  size_t i = 0;
  while (i < s.size()) {
    if (std::isalnum(static_cast<unsigned char>(s[i]))) {
      size_t j = i;
      while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
      toks.push_back({s.substr(i, j - i), i, j});
      i = j;
    } else {
      ++i;
    }
  }
  return toks;
}

std::vector<std::string> split_words(const std::string& phrase) {
  std::vector<std::string> out;
  std::istringstream is(phrase);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

// First token index where the phrase matches, or npos.
size_t find_phrase(const std::vector<Token>& toks, const std::vector<std::string>& words,
                   size_t from = 0) {
  if (words.empty()) return std::string::npos;
  for (size_t i = from; i + words.size() <= toks.size(); ++i) {
    bool ok = true;
    for (size_t k = 0; k < words.size(); ++k)
      if (toks[i + k].text != words[k]) {
        ok = false;
        break;
      }
    if (ok) return i;
  }
  return std::string::npos;
}

struct ClockTime {
  int hour = 0, minute = 0;
};

double resolve_on_note_date(double note_time, int day_offset, int hour, int minute,
                            bool rollback_if_future) {
  std::time_t tt = static_cast<std::time_t>(std::floor(note_time));
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::tm cand = tm;
  cand.tm_hour = hour;
  cand.tm_min = minute;
  cand.tm_sec = 0;
  double ts = static_cast<double>(timegm(&cand)) + static_cast<double>(day_offset) * 86400.0;
  if (rollback_if_future) {
    // Clock later than the note's clock means the previous day.
    double note_clock = tm.tm_hour * 3600.0 + tm.tm_min * 60.0 + tm.tm_sec;
    double cand_clock = hour * 3600.0 + minute * 60.0;
    if (cand_clock > note_clock) ts -= 86400.0;
  }
  return ts;
}

int small_number_word(const std::string& w) {
  static const std::pair<const char*, int> words[] = {
      {"a", 1},    {"an", 1},    {"one", 1},   {"two", 2},   {"three", 3},
      {"four", 4}, {"five", 5},  {"six", 6},   {"seven", 7}, {"eight", 8},
      {"nine", 9}, {"ten", 10},  {"eleven", 11}, {"twelve", 12}};
  for (const auto& [s, v] : words)
    if (w == s) return v;
  return -1;
}

struct TemporalMatch {
  size_t pos = std::string::npos;  // char offset within the sentence
  size_t end = 0;
  double ts = 0.0;
  Confidence conf = Confidence::Medium;
};

std::optional<TemporalMatch> find_absolute(const std::string& sent, double note_time) {
  static const std::regex clock_re(
      R"((?:\bat|\baround|\babout|@)\s+(\d{1,2}):(\d{2})(?:\s*(am|pm))?)",
      std::regex::icase);
  static const std::regex word_re(R"((?:\bat|\baround|\babout)\s+(noon|midnight)\b)",
                                  std::regex::icase);
  std::optional<TemporalMatch> best;
  for (auto it = std::sregex_iterator(sent.begin(), sent.end(), clock_re);
       it != std::sregex_iterator(); ++it) {
    int h = std::stoi((*it)[1]);
    int m = std::stoi((*it)[2]);
    std::string mer = (*it)[3];
    if (h > 23 || m > 59) continue;
    if (!mer.empty()) {
      if (h > 12) continue;
      if (mer == "pm" && h != 12) h += 12;
      if (mer == "am" && h == 12) h = 0;
    }
    TemporalMatch tm;
    tm.pos = static_cast<size_t>(it->position(0));
    tm.end = tm.pos + it->length(0);
    tm.ts = resolve_on_note_date(note_time, 0, h, m, true);
    tm.conf = Confidence::High;
    if (!best || tm.pos < best->pos) best = tm;
  }
  for (auto it = std::sregex_iterator(sent.begin(), sent.end(), word_re);
       it != std::sregex_iterator(); ++it) {
    std::string w = (*it)[1];
    int h = (w == "noon") ? 12 : 0;
    TemporalMatch tm;
    tm.pos = static_cast<size_t>(it->position(0));
    tm.end = tm.pos + it->length(0);
    tm.ts = resolve_on_note_date(note_time, 0, h, 0, true);
    tm.conf = Confidence::High;
    if (!best || tm.pos < best->pos) best = tm;
  }
  return best;
}

std::optional<TemporalMatch> find_relative(const std::string& sent, double note_time,
                                           const Lexicon& lex) {
  static const std::regex ago_re(
      R"(\b(\d+|half an|an|a|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve)\s+(hours?|hrs?|minutes?|mins?)\s+ago\b)");
  std::optional<TemporalMatch> best;
  for (auto it = std::sregex_iterator(sent.begin(), sent.end(), ago_re);
       it != std::sregex_iterator(); ++it) {
    std::string num = (*it)[1], unit = (*it)[2];
    double amount;
    if (num == "half an") {
      amount = 0.5;
    } else if (std::isdigit(static_cast<unsigned char>(num[0]))) {
      amount = std::stod(num);
    } else {
      int v = small_number_word(num);
      if (v < 0) continue;
      amount = v;
    }
    double seconds = unit[0] == 'h' ? amount * 3600.0 : amount * 60.0;
    TemporalMatch tm;
    tm.pos = static_cast<size_t>(it->position(0));
    tm.end = tm.pos + it->length(0);
    tm.ts = note_time - seconds;
    tm.conf = Confidence::Medium;
    if (!best || tm.pos < best->pos) best = tm;
  }
  for (const auto& [phrase, d, h, m] : lex.anchors) {
    size_t pos = sent.find(phrase);
    if (pos == std::string::npos) continue;
    TemporalMatch tm;
    tm.pos = pos;
    tm.end = pos + phrase.size();
    tm.ts = resolve_on_note_date(note_time, d, h, m, false);
    tm.conf = Confidence::Medium;
    if (!best || tm.pos < best->pos) best = tm;
  }
  return best;
}

}  // namespace

OnsetResolution parse_note(const NoteRecord& n, const Lexicon& lex) {
  OnsetResolution res;
  if (n.text.empty()) return res;
  std::string norm = normalize(n.text);
  auto toks = tokenize(norm);

  std::vector<std::vector<std::string>> guard_words;
  for (const auto& g : lex.guards) guard_words.push_back(split_words(g));

  // Unguarded trigger occurrences, in text order.
  struct Trigger {
    size_t tok_begin, tok_end;  // token range
    size_t char_begin, char_end;
  };
  std::vector<Trigger> triggers;
  for (const auto& t : lex.triggers) {
    auto words = split_words(t);
    size_t from = 0;
    while (true) {
      size_t ti = find_phrase(toks, words, from);
      if (ti == std::string::npos) break;
      from = ti + 1;
      size_t tj = ti + words.size();
      // Negation/history screen within a 5-token window around the match.
      size_t wlo = ti >= 5 ? ti - 5 : 0;
      size_t whi = std::min(toks.size(), tj + 5);
      bool guarded = false;
      for (const auto& gw : guard_words) {
        for (size_t gi = wlo; gi + gw.size() <= whi && !guarded; ++gi) {
          bool ok = true;
          for (size_t k = 0; k < gw.size(); ++k)
            if (toks[gi + k].text != gw[k]) {
              ok = false;
              break;
            }
          guarded = ok;
        }
        if (guarded) break;
      }
      if (!guarded) triggers.push_back({ti, tj, toks[ti].begin, toks[tj - 1].end});
    }
  }
  if (triggers.empty()) return res;  // NonEvent
  std::sort(triggers.begin(), triggers.end(),
            [](const Trigger& a, const Trigger& b) { return a.char_begin < b.char_begin; });

  auto sentence_bounds = [&](size_t pos) {
    static const std::string delims = ".;!?\n";
    size_t lo = 0;
    for (size_t i = pos; i-- > 0;)
      if (delims.find(norm[i]) != std::string::npos) {
        lo = i + 1;
        break;
      }
    size_t hi = norm.size();
    for (size_t i = pos; i < norm.size(); ++i)
      if (delims.find(norm[i]) != std::string::npos) {
        hi = i;
        break;
      }
    return std::pair<size_t, size_t>(lo, hi);
  };

  for (const auto& trig : triggers) {
    auto [lo, hi] = sentence_bounds(trig.char_begin);
    std::string sent = norm.substr(lo, hi - lo);
    auto abs_match = find_absolute(sent, n.note_time);
    std::optional<TemporalMatch> rel_match;
    if (!abs_match) rel_match = find_relative(sent, n.note_time, lex);
    const auto& m = abs_match ? abs_match : rel_match;
    if (!m) continue;
    if (m->ts > n.note_time + 86400.0) continue;  // future-onset rejected
    res.kind = ResolutionKind::Explicit;
    res.ts = m->ts;
    res.confidence = m->conf;
    res.span_begin = lo + m->pos;
    res.span_end = lo + m->end;
    return res;
  }

  // Trigger but no temporal pattern: note creation time as upper bound.
  res.kind = ResolutionKind::Proxy;
  res.ts = n.note_time;
  res.confidence = Confidence::Low;
  res.span_begin = triggers.front().char_begin;
  res.span_end = triggers.front().char_end;
  return res;
}

CorpusReport parse_corpus(const std::vector<NoteRecord>& notes, const Lexicon& lex) {
  CorpusReport rep;
  for (const auto& n : notes) {
    OnsetResolution r = parse_note(n, lex);
    switch (r.kind) {
      case ResolutionKind::Explicit: ++rep.n_explicit; break;
      case ResolutionKind::Proxy: ++rep.n_proxy; break;
      case ResolutionKind::NonEvent: ++rep.n_nonevent; break;
    }
    if (r.kind == ResolutionKind::NonEvent) continue;
    auto it = rep.per_patient.find(n.patient_id);
    if (it == rep.per_patient.end()) {
      rep.per_patient[n.patient_id] = r;
      continue;
    }
    // Explicit beats Proxy; within a kind the earliest timestamp wins.
    bool cur_explicit = it->second.kind == ResolutionKind::Explicit;
    bool new_explicit = r.kind == ResolutionKind::Explicit;
    if ((new_explicit && !cur_explicit) ||
        (new_explicit == cur_explicit && r.ts < it->second.ts))
      it->second = r;
  }
  return rep;
}

std::vector<NoteRecord> load_notes_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_notes_jsonl: cannot open " + path.string());
  std::vector<NoteRecord> notes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    NoteRecord n;
    n.note_id = j.value("note_id", "");
    n.patient_id = j.value("patient_id", "");
    n.note_time = j["note_time"].get<double>();
    n.text = j.value("text", "");
    notes.push_back(std::move(n));
  }
  return notes;
}

void save_onset_csv(const std::filesystem::path& path, const CorpusReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_onset_csv: cannot open " + path.string());
  out << "patient_id,onset_epoch_s,kind,confidence,span_begin,span_end\n";
  for (const auto& [pid, r] : report.per_patient) {
    const char* kind = r.kind == ResolutionKind::Explicit ? "Explicit" : "Proxy";
    const char* conf = r.confidence == Confidence::High
                           ? "High"
                           : (r.confidence == Confidence::Medium ? "Medium" : "Low");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", r.ts);
    out << pid << "," << buf << "," << kind << "," << conf << "," << r.span_begin
        << "," << r.span_end << "\n";
  }
}

}  // namespace strokeppg
