#include "emer/prompts.h"

#include "emer/errors.h"

namespace emer {
namespace {

// The grouping instruction is used word for word; the vocabulary follows it
// as a JSON list.
constexpr std::string_view kGroupBody =
    "Please assume the role of an expert in the field of emotions. We provide a set of "
    "emotions. Please group the emotions, with each group containing emotions with the "
    "same meaning. Directly output the results. The output format should be a list "
    "containing multiple lists.\n"
    "Emotions: {emotions}";

constexpr std::string_view kPrelabelAudioBody =
    "You are given the audio track of a video clip: {media_ref}\n"
    "Describe the vocal cues that reveal the speaker's emotional state, such as tone, "
    "pitch, speaking rate and intensity. Only report what can be heard.";

constexpr std::string_view kPrelabelVideoBody =
    "You are given a video clip: {media_ref}\n"
    "Describe the facial expressions, gestures and body movements that reveal the "
    "person's emotional state. Only report what can be seen.";

constexpr std::string_view kPrelabelReconcileBody =
    "Subtitle of the clip: \"{subtitle}\"\n"
    "The subtitle alone may be ambiguous. Using the {modality} clues below, describe how "
    "the subtitle should be read and what the speaker most likely feels.\n"
    "Clues: {clues}";

constexpr std::string_view kMergeBody =
    "Combine the evidence below into a single description of the person's emotional "
    "state, citing the cues that support it.\n"
    "Audio clues: {audio_desc}\n"
    "Visual clues: {video_desc}\n"
    "Subtitle: \"{subtitle}\"";

constexpr std::string_view kDisambiguateBody =
    "Subtitle: \"{subtitle}\"\n"
    "The emotional meaning of the subtitle may be ambiguous. Revise the description below "
    "so that it states the reading of the subtitle best supported by the audio and visual "
    "clues. Output only the revised description.\n"
    "Description: {description}";

constexpr std::string_view kTranslateBody =
    "Translate the following text from {source_language} into {target_language}. Output "
    "only the translation.\n"
    "{text}";

constexpr std::string_view kExtractLabelsBody =
    "List every emotion expressed in the description below. Output a list of short "
    "emotion labels, e.g. [\"happy\", \"excited\"], and nothing else.\n"
    "Description: {description}";

}  // namespace

PromptLibrary PromptLibrary::defaults() {
  PromptLibrary lib;
  lib.publish({std::string(prompt_ids::kGroup), "v1", std::string(kGroupBody), PromptRole::kGroup});
  lib.publish({std::string(prompt_ids::kPrelabelAudio), "v1", std::string(kPrelabelAudioBody),
               PromptRole::kPrelabelAudio});
  lib.publish({std::string(prompt_ids::kPrelabelVideo), "v1", std::string(kPrelabelVideoBody),
               PromptRole::kPrelabelVideo});
  lib.publish({std::string(prompt_ids::kPrelabelReconcile), "v1",
               std::string(kPrelabelReconcileBody), PromptRole::kDisambiguate});
  lib.publish({std::string(prompt_ids::kMerge), "v1", std::string(kMergeBody), PromptRole::kMerge});
  lib.publish({std::string(prompt_ids::kDisambiguate), "v1", std::string(kDisambiguateBody),
               PromptRole::kDisambiguate});
  lib.publish({std::string(prompt_ids::kTranslate), "v1", std::string(kTranslateBody),
               PromptRole::kTranslate});
  lib.publish({std::string(prompt_ids::kExtractLabels), "v1", std::string(kExtractLabelsBody),
               PromptRole::kExtractLabels});
  return lib;
}

void PromptLibrary::publish(PromptTemplate prompt) {
  if (prompt.id.empty() || prompt.version.empty()) {
    throw TemplateError("prompt id and version must be non-empty");
  }
  auto& versions = prompts_[prompt.id];
  if (auto it = versions.find(prompt.version); it != versions.end()) {
    if (it->second.body != prompt.body || it->second.role != prompt.role) {
      throw TemplateError("prompt " + prompt.id + "@" + prompt.version +
                          " is already published with different content");
    }
    return;
  }
  latest_[prompt.id] = prompt.version;
  versions.emplace(prompt.version, std::move(prompt));
}

const PromptTemplate& PromptLibrary::get(std::string_view id) const {
  auto it = latest_.find(id);
  if (it == latest_.end()) throw TemplateError("unknown prompt '" + std::string(id) + "'");
  return get(id, it->second);
}

const PromptTemplate& PromptLibrary::get(std::string_view id, std::string_view version) const {
  auto it = prompts_.find(id);
  if (it != prompts_.end()) {
    if (auto v = it->second.find(std::string(version)); v != it->second.end()) return v->second;
  }
  throw TemplateError("unknown prompt '" + std::string(id) + "@" + std::string(version) + "'");
}

bool PromptLibrary::contains(std::string_view id) const { return latest_.find(id) != latest_.end(); }

std::vector<std::string> PromptLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : latest_) out.push_back(id);
  return out;
}

}  // namespace emer
