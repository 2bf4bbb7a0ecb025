#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emer {

// Base for every error the library raises. `code()` is the stable,
// machine-readable name used in CLI error JSON and failure reports.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class EmptyLabel : public Error {
 public:
  explicit EmptyLabel(const std::string& raw)
      : Error("EmptyLabel", "label is empty after normalization: '" + raw + "'") {}
};

// The reply could not be read as the expected list structure. The raw reply
// is kept verbatim for audit.
class ParseFailure : public Error {
 public:
  ParseFailure(const std::string& message, std::string raw_reply)
      : Error("ParseFailure", message), raw_reply_(std::move(raw_reply)) {}

  const std::string& raw_reply() const noexcept { return raw_reply_; }

 private:
  std::string raw_reply_;
};

class GrouperUnavailable : public Error {
 public:
  explicit GrouperUnavailable(const std::string& message)
      : Error("GrouperUnavailable", message) {}
};

class EmptyAnnotation : public Error {
 public:
  EmptyAnnotation() : Error("EmptyAnnotation", "annotated group set is empty") {}
};

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error("EmptyCorpus", "no (annotated, predicted) pairs to score") {}
};

class TemplateError : public Error {
 public:
  explicit TemplateError(const std::string& message)
      : Error("TemplateError", message) {}
};

class BackendTimeout : public Error {
 public:
  explicit BackendTimeout(const std::string& message)
      : Error("BackendTimeout", message) {}
};

// Non-2xx reply (or a strict mock refusing an unscripted prompt). The
// response body is preserved.
class BackendRejected : public Error {
 public:
  BackendRejected(int status, std::string body, const std::string& message)
      : Error("BackendRejected", message), status_(status), body_(std::move(body)) {}

  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }
  // 408, 429 and 5xx are worth retrying; everything else is final.
  bool retryable() const noexcept {
    return status_ == 408 || status_ == 429 || status_ >= 500 || status_ == 0;
  }

 private:
  int status_;
  std::string body_;
};

class RetriesExhausted : public Error {
 public:
  RetriesExhausted(int attempts, const std::string& last_error)
      : Error("RetriesExhausted", "gave up after " + std::to_string(attempts) +
                                      " attempts: " + last_error),
        attempts_(attempts) {}

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class MissingPrerequisite : public Error {
 public:
  explicit MissingPrerequisite(const std::string& message)
      : Error("MissingPrerequisite", message) {}
};

// A pipeline stage failed for one sample. `code()` is the underlying error's
// code so failure reports keep the root cause.
class StageFailed : public Error {
 public:
  StageFailed(std::string sample_id, std::string stage, const std::string& cause_code,
              const std::string& message)
      : Error(cause_code, "sample '" + sample_id + "', stage " + stage + ": " + message),
        sample_id_(std::move(sample_id)),
        stage_(std::move(stage)),
        cause_(message) {}

  const std::string& sample_id() const noexcept { return sample_id_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& cause() const noexcept { return cause_; }

 private:
  std::string sample_id_;
  std::string stage_;
  std::string cause_;
};

class ManifestInvalid : public Error {
 public:
  explicit ManifestInvalid(const std::string& message)
      : Error("ManifestInvalid", message) {}
};

class PipelineAborted : public Error {
 public:
  explicit PipelineAborted(const std::string& message)
      : Error("PipelineAborted", message) {}
};

// Line numbers are 1-based; 0 means "not tied to a line".
class SchemaViolation : public Error {
 public:
  SchemaViolation(std::size_t line, std::string field, const std::string& message)
      : Error("SchemaViolation", "line " + std::to_string(line) + ", field '" +
                                     field + "': " + message),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class CountMismatch : public Error {
 public:
  explicit CountMismatch(const std::string& message)
      : Error("CountMismatch", message) {}
};

class PredictionsMissing : public Error {
 public:
  explicit PredictionsMissing(const std::string& message)
      : Error("PredictionsMissing", message) {}
};

class UnknownBaseline : public Error {
 public:
  explicit UnknownBaseline(const std::string& name)
      : Error("UnknownBaseline", "no row named '" + name + "'") {}
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key, std::size_t line, const std::string& message)
      : Error("ConfigError", (line ? "line " + std::to_string(line) + ", " : std::string()) +
                                 "key '" + key + "': " + message),
        key_(std::move(key)),
        line_(line) {}

  const std::string& key() const noexcept { return key_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string key_;
  std::size_t line_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("IoError", message) {}
};

}  // namespace emer
