#pragma once

#include <filesystem>
#include <tuple>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace strokeppg {

struct NoteRecord {
  std::string note_id;
  std::string patient_id;
  double note_time = 0.0;  // epoch seconds (note creation time)
  std::string text;
};

enum class ResolutionKind { Explicit, Proxy, NonEvent };
enum class Confidence { High, Medium, Low };

struct OnsetResolution {
  ResolutionKind kind = ResolutionKind::NonEvent;
  double ts = 0.0;            // valid for Explicit and Proxy
  Confidence confidence = Confidence::Low;
  size_t span_begin = 0, span_end = 0;  // matched text range (Explicit/Proxy)
};

// Trigger lexicon, negation/history guards, and fixed clock anchors for
// vague expressions. Editable as a plain-text rule file.
struct Lexicon {
  std::vector<std::string> triggers;
  std::vector<std::string> guards;
  // phrase -> (day_offset, hour, minute); e.g. "last night" -> (-1, 22, 0)
  std::vector<std::tuple<std::string, int, int, int>> anchors;
  std::string version = "builtin-1";
};

Lexicon default_lexicon();
Lexicon load_lexicon(const std::filesystem::path& path);
void save_lexicon(const std::filesystem::path& path, const Lexicon& lex);

// Deterministic rule cascade: trigger + guard screen, then absolute clock
// times, then relative expressions, then note-time proxy.
OnsetResolution parse_note(const NoteRecord& n, const Lexicon& lex = default_lexicon());

struct CorpusReport {
  std::map<std::string, OnsetResolution> per_patient;  // earliest onset
  int n_explicit = 0, n_proxy = 0, n_nonevent = 0;
};

CorpusReport parse_corpus(const std::vector<NoteRecord>& notes,
                          const Lexicon& lex = default_lexicon());

std::vector<NoteRecord> load_notes_jsonl(const std::filesystem::path& path);
void save_onset_csv(const std::filesystem::path& path, const CorpusReport& report);

}  // namespace strokeppg
