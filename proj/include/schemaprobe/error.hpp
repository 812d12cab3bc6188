#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace schemaprobe {

// Root of every error thrown by the library. `kind()` is a stable short
// name used by the CLI and the Python bindings.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t line, const std::string& reason)
      : Error("SyntaxError", "line " + std::to_string(line) + ": " + reason),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ReferenceError : public Error {
 public:
  explicit ReferenceError(const std::string& name)
      : Error("ReferenceError", "unknown reference: " + name), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class CycleError : public Error {
 public:
  explicit CycleError(std::vector<std::string> path)
      : Error("CycleError", "nesting cycle: " + join(path)), path_(std::move(path)) {}
  const std::vector<std::string>& path() const noexcept { return path_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i) out += " -> ";
      out += p[i];
    }
    return out;
  }
  std::vector<std::string> path_;
};

class DuplicateError : public Error {
 public:
  explicit DuplicateError(const std::string& name)
      : Error("DuplicateError", "duplicate name: " + name) {}
};

class InvalidSchema : public Error {
 public:
  explicit InvalidSchema(const std::string& m) : Error("InvalidSchema", m) {}
};

class InvalidTemplate : public Error {
 public:
  explicit InvalidTemplate(const std::string& m) : Error("InvalidTemplate", m) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& reason)
      : Error("ParseError", "row " + std::to_string(row) + ": " + reason), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class UnknownCategory : public Error {
 public:
  explicit UnknownCategory(const std::string& v)
      : Error("UnknownCategory", "unknown harm category: " + v) {}
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& id) : Error("DuplicateId", "duplicate id: " + id) {}
};

class MissingTemplateForCategory : public Error {
 public:
  explicit MissingTemplateForCategory(const std::string& c)
      : Error("MissingTemplateForCategory", "no template declared for category: " + c) {}
};

class AuthError : public Error {
 public:
  explicit AuthError(const std::string& m) : Error("AuthError", m) {}
};

class TransportError : public Error {
 public:
  TransportError(const std::string& m, int attempts, int last_status)
      : Error("TransportError", m), attempts_(attempts), last_status_(last_status) {}
  int attempts() const noexcept { return attempts_; }
  int last_status() const noexcept { return last_status_; }

 private:
  int attempts_;
  int last_status_;
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& m) : Error("ProtocolError", m) {}
};

class ManifestError : public Error {
 public:
  ManifestError(const std::string& field, const std::string& reason)
      : Error("ManifestError", field + ": " + reason), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class StoreError : public Error {
 public:
  explicit StoreError(const std::string& m) : Error("StoreError", m) {}
};

class PlanMismatch : public Error {
 public:
  PlanMismatch(const std::string& stored, const std::string& given)
      : Error("PlanMismatch", "stored plan " + stored + " does not match manifest plan " + given) {}
};

class NotJudgeable : public Error {
 public:
  explicit NotJudgeable(const std::string& m) : Error("NotJudgeable", m) {}
};

class UnknownKey : public Error {
 public:
  explicit UnknownKey(const std::string& k) : Error("UnknownKey", "no record with key " + k) {}
};

class UnjudgedKey : public Error {
 public:
  explicit UnjudgedKey(const std::string& k)
      : Error("UnjudgedKey", "record has no settled verdict: " + k) {}
};

class UnjudgedRecords : public Error {
 public:
  explicit UnjudgedRecords(std::size_t count)
      : Error("UnjudgedRecords", std::to_string(count) + " ok records lack a verdict"), count_(count) {}
  std::size_t count() const noexcept { return count_; }

 private:
  std::size_t count_;
};

class MissingBaseline : public Error {
 public:
  MissingBaseline() : Error("MissingBaseline", "table has no Full variant") {}
};

class EmptySet : public Error {
 public:
  explicit EmptySet(const std::string& m) : Error("EmptySet", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("IoError", m) {}
};

class PortInUse : public Error {
 public:
  explicit PortInUse(int port) : Error("PortInUse", "cannot bind port " + std::to_string(port)) {}
};

}  // namespace schemaprobe
