#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "emer/gateway.h"

namespace emer {

// Template ids of the shipped defaults.
namespace prompt_ids {
inline constexpr std::string_view kGroup = "group";
inline constexpr std::string_view kPrelabelAudio = "prelabel_audio";
inline constexpr std::string_view kPrelabelVideo = "prelabel_video";
inline constexpr std::string_view kPrelabelReconcile = "prelabel_reconcile";
inline constexpr std::string_view kMerge = "merge";
inline constexpr std::string_view kDisambiguate = "disambiguate";
inline constexpr std::string_view kTranslate = "translate";
inline constexpr std::string_view kExtractLabels = "extract_labels";
}  // namespace prompt_ids

// Versioned prompt store. Publishing an (id, version) pair twice with a
// different body is an error; the latest published version of an id wins
// lookups by id.
class PromptLibrary {
 public:
  // Library pre-populated with the shipped defaults.
  static PromptLibrary defaults();

  void publish(PromptTemplate prompt);
  const PromptTemplate& get(std::string_view id) const;
  const PromptTemplate& get(std::string_view id, std::string_view version) const;
  bool contains(std::string_view id) const;
  std::vector<std::string> ids() const;

 private:
  // id -> version -> template
  std::map<std::string, std::map<std::string, PromptTemplate>, std::less<>> prompts_;
  std::map<std::string, std::string, std::less<>> latest_;
};

}  // namespace emer
