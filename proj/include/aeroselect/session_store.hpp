#pragma once

// Append-only session logs: one JSON header line, then one JSON line per
// trial record or selection event. A line only counts once its newline is on
// disk, so a crash can cost at most the last partial line.
//
// Layout: <data_dir>/<group>/<player_id>/session<k>.ndjson

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aeroselect/error.hpp"
#include "aeroselect/game_core.hpp"
#include "aeroselect/localization.hpp"

namespace aeroselect {

inline constexpr int kSchemaVersion = 1;

struct SessionHeader {
  int schema_version = kSchemaVersion;
  std::string player_id;
  Group group = Group::EG;
  Method method = Method::SG;
  int session_index = 1;
  nlohmann::json config = nlohmann::json::object();
  std::int64_t start_epoch_ms = 0;
};

inline void to_json(nlohmann::json& j, const SessionHeader& h) {
  j = nlohmann::json{{"kind", "header"},
                     {"schema_version", h.schema_version},
                     {"player_id", h.player_id},
                     {"group", to_string(h.group)},
                     {"method", to_string(h.method)},
                     {"session_index", h.session_index},
                     {"config", h.config},
                     {"start_epoch_ms", h.start_epoch_ms}};
}

inline SessionHeader header_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "header") throw Error(ErrorCode::CorruptLog, "first line is not a header");
  SessionHeader h;
  h.schema_version = j.at("schema_version").get<int>();
  h.player_id = j.at("player_id").get<std::string>();
  const auto g = group_from_string(j.at("group").get<std::string>());
  const auto m = method_from_string(j.at("method").get<std::string>());
  if (!g || !m) throw Error(ErrorCode::CorruptLog, "bad group/method in header");
  h.group = *g;
  h.method = *m;
  h.session_index = j.at("session_index").get<int>();
  h.config = j.value("config", nlohmann::json::object());
  h.start_epoch_ms = j.at("start_epoch_ms").get<std::int64_t>();
  return h;
}

struct SessionContents {
  SessionHeader header;
  std::vector<TrialRecord> records;
  std::vector<SelectionEvent> events;
  // Length of the prefix made of complete lines.
  std::size_t valid_bytes = 0;
  std::size_t dropped_tail_bytes = 0;
};

inline SessionContents parse_session_log(std::string_view text) {
  SessionContents out;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) break;  // partial tail
    const std::string_view line = text.substr(pos, nl - pos);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      if (!have_header) {
        out.header = header_from_json(j);
        have_header = true;
      } else {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "record") {
          out.records.push_back(j.at("record").get<TrialRecord>());
        } else if (kind == "selection") {
          out.events.push_back(selection_from_json(j.at("event")));
        } else {
          throw Error(ErrorCode::CorruptLog, "unknown line kind '" + kind + "'");
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::CorruptLog, "line at byte " + std::to_string(pos) + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::CorruptLog) throw;
      throw Error(ErrorCode::CorruptLog, "line at byte " + std::to_string(pos) + ": " + e.what());
    }
    pos = nl + 1;
  }
  if (!have_header) throw Error(ErrorCode::CorruptLog, "missing header line");
  out.valid_bytes = pos;
  out.dropped_tail_bytes = text.size() - pos;
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SessionContents read_session_log(const std::filesystem::path& path) {
  return parse_session_log(read_file(path));
}

class SessionLog {
 public:
  SessionLog(const SessionLog&) = delete;
  SessionLog& operator=(const SessionLog&) = delete;
  SessionLog(SessionLog&& other) noexcept { *this = std::move(other); }
  SessionLog& operator=(SessionLog&& other) noexcept {
    if (this != &other) {
      close();
      path_ = std::move(other.path_);
      contents_ = std::move(other.contents_);
      fd_ = std::exchange(other.fd_, -1);
      size_ = other.size_;
      sync_ = other.sync_;
    }
    return *this;
  }
  ~SessionLog() { close(); }

  // Creates a new log. Fails if the file already exists.
  static SessionLog create(const std::filesystem::path& path, const SessionHeader& header, bool sync = true) {
    check_header(header);
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::StorageFailure, "cannot create " + path.parent_path().string() + ": " + ec.message());
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::StorageFailure, "cannot create " + path.string() + ": " + std::strerror(errno));
    SessionLog log(path, fd, sync);
    log.contents_.header = header;
    log.write_line(nlohmann::json(header).dump());
    return log;
  }

  // Reopens an existing log for appending, cutting off a partial last line.
  static SessionLog open(const std::filesystem::path& path, bool sync = true) {
    SessionContents contents = read_session_log(path);
    const int fd = ::open(path.c_str(), O_WRONLY | O_CLOEXEC);
    if (fd < 0) throw Error(ErrorCode::StorageFailure, "cannot open " + path.string() + ": " + std::strerror(errno));
    if (contents.dropped_tail_bytes > 0 && ::ftruncate(fd, static_cast<off_t>(contents.valid_bytes)) != 0) {
      ::close(fd);
      throw Error(ErrorCode::StorageFailure, "cannot truncate partial tail of " + path.string());
    }
    SessionLog log(path, fd, sync);
    log.size_ = contents.valid_bytes;
    log.contents_ = std::move(contents);
    log.contents_.dropped_tail_bytes = 0;
    return log;
  }

  static SessionLog open_or_create(const std::filesystem::path& path, const SessionHeader& header, bool sync = true) {
    if (std::filesystem::exists(path)) {
      SessionLog log = open(path, sync);
      const auto& h = log.header();
      if (h.player_id != header.player_id || h.group != header.group || h.method != header.method ||
          h.session_index != header.session_index) {
        throw Error(ErrorCode::CorruptLog, "existing log " + path.string() + " belongs to another session");
      }
      return log;
    }
    return create(path, header, sync);
  }

  // Returns the record id: its zero-based position in the log.
  std::uint64_t append_record(const TrialRecord& record) {
    validate(record);
    const auto& h = contents_.header;
    if (record.session_index != h.session_index || record.player_id != h.player_id || record.group != h.group ||
        record.method != h.method) {
      throw Error(ErrorCode::InvalidRecord, "record does not match the session header");
    }
    const std::uint64_t id = contents_.records.size();
    write_line(nlohmann::json{{"kind", "record"}, {"id", id}, {"record", record}}.dump());
    contents_.records.push_back(record);
    return id;
  }

  void append_event(const SelectionEvent& event) {
    write_line(nlohmann::json{{"kind", "selection"}, {"event", event}}.dump());
    contents_.events.push_back(event);
  }

  const SessionHeader& header() const { return contents_.header; }
  const std::vector<TrialRecord>& records() const { return contents_.records; }
  const std::vector<SelectionEvent>& events() const { return contents_.events; }
  const std::filesystem::path& path() const { return path_; }

 private:
  SessionLog(std::filesystem::path path, int fd, bool sync) : path_(std::move(path)), fd_(fd), sync_(sync) {}

  static void check_header(const SessionHeader& h) {
    if (h.session_index < 1 || h.session_index > kSessionsPerChild) {
      throw Error(ErrorCode::InvalidRecord, "session_index " + std::to_string(h.session_index) + " outside 1..4");
    }
    if (h.player_id.empty()) throw Error(ErrorCode::InvalidRecord, "empty player_id");
  }

  void write_line(std::string line) {
    line.push_back('\n');
    std::size_t written = 0;
    while (written < line.size()) {
      const ssize_t n = ::pwrite(fd_, line.data() + written, line.size() - written, static_cast<off_t>(size_ + written));
      if (n < 0) {
        if (errno == EINTR) continue;
        const std::string why = std::strerror(errno);
        // Roll back to the last complete line.
        [[maybe_unused]] int rc = ::ftruncate(fd_, static_cast<off_t>(size_));
        throw Error(ErrorCode::StorageFailure, "write to " + path_.string() + " failed: " + why);
      }
      written += static_cast<std::size_t>(n);
    }
    if (sync_ && ::fsync(fd_) != 0) {
      throw Error(ErrorCode::StorageFailure, "fsync of " + path_.string() + " failed: " + std::strerror(errno));
    }
    size_ += line.size();
  }

  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  std::filesystem::path path_;
  SessionContents contents_;
  int fd_ = -1;
  std::size_t size_ = 0;
  bool sync_ = true;
};

struct RecordFilter {
  std::optional<Group> group;
  std::optional<Method> method;
  std::optional<int> session_index;

  bool matches(const TrialRecord& r) const {
    return (!group || r.group == *group) && (!method || r.method == *method) &&
           (!session_index || r.session_index == *session_index);
  }
};

inline std::vector<TrialRecord> query(std::span<const TrialRecord> records, const RecordFilter& filter) {
  std::vector<TrialRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [&](const TrialRecord& r) { return filter.matches(r); });
  return out;
}

// A directory of session logs.
class DataStore {
 public:
  explicit DataStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path path_for(Group group, const std::string& player_id, int session_index) const {
    return root_ / std::string(to_string(group)) / player_id / ("session" + std::to_string(session_index) + ".ndjson");
  }

  SessionLog open_session(const SessionHeader& header, bool sync = true) const {
    return SessionLog::open_or_create(path_for(header.group, header.player_id, header.session_index), header, sync);
  }

  // All logs, sorted by path so reads are deterministic.
  std::vector<std::filesystem::path> list_logs() const {
    std::vector<std::filesystem::path> out;
    std::error_code ec;
    if (!std::filesystem::exists(root_, ec)) return out;
    for (auto it = std::filesystem::recursive_directory_iterator(root_, ec);
         !ec && it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
      if (it->is_regular_file() && it->path().extension() == ".ndjson") out.push_back(it->path());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<TrialRecord> read_all() const {
    std::vector<TrialRecord> out;
    for (const auto& p : list_logs()) {
      auto contents = read_session_log(p);
      out.insert(out.end(), contents.records.begin(), contents.records.end());
    }
    return out;
  }

  std::vector<TrialRecord> query(const RecordFilter& filter) const { return aeroselect::query(read_all(), filter); }

 private:
  std::filesystem::path root_;
};

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline void write_records_csv(std::ostream& out, std::span<const TrialRecord> records) {
  out << "player_id,group,session_index,method,elapsed_s,successes,failures,grade,complete\n";
  for (const auto& r : records) {
    out << detail::csv_field(r.player_id) << ',' << to_string(r.group) << ',' << r.session_index << ','
        << to_string(r.method) << ',' << nlohmann::json(r.elapsed_s).dump() << ',' << r.successes << ','
        << r.failures << ',' << nlohmann::json(r.grade).dump() << ',' << (r.complete ? "true" : "false") << '\n';
  }
}

}  // namespace aeroselect
