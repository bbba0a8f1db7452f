#include <cmath>
#include <fstream>
#include <string>

#include "gvf/gvf.hpp"
#include "text_format.hpp"

namespace gvf {

std::string format_record(const ExperienceRecord& record) {
  const auto& s = record.sample;
  require(s.state_t.size() == s.state_next.size(), "format_record: state sizes differ");
  std::string line = fmt::format("{},{},{},{},{},{},{},{},{}", record.episode, record.step, record.learner,
                                 s.action_t, text::real(s.transient_reward), text::real(s.terminal_reward),
                                 text::real(s.gamma_next), text::real(s.behavior_prob), s.state_t.size());
  for (double v : s.state_t) (line += ',') += text::real(v);
  for (double v : s.state_next) (line += ',') += text::real(v);
  return line;
}

ExperienceRecord parse_record(std::string_view line, std::size_t line_number) {
  const auto fields = text::split(text::trim(line), ',');
  if (fields.size() < 9) throw ParseError("experience record has too few fields", line_number);
  ExperienceRecord r;
  r.episode = text::parse_uint<std::uint64_t>(fields[0], line_number);
  r.step = text::parse_uint<std::uint64_t>(fields[1], line_number);
  r.learner = text::parse_uint<std::uint32_t>(fields[2], line_number);
  auto& s = r.sample;
  s.action_t = text::parse_uint<ActionId>(fields[3], line_number);
  s.transient_reward = text::parse_real(fields[4], line_number);
  s.terminal_reward = text::parse_real(fields[5], line_number);
  s.gamma_next = text::parse_real(fields[6], line_number);
  s.behavior_prob = text::parse_real(fields[7], line_number);
  const auto n = text::parse_uint<std::size_t>(fields[8], line_number);
  if (fields.size() != 9 + 2 * n)
    throw ParseError("experience record field count does not match its state size", line_number);
  if (!(s.behavior_prob > 0.0 && s.behavior_prob <= 1.0))
    throw ParseError("behavior probability must lie in (0, 1]", line_number);
  if (!(s.gamma_next >= 0.0 && s.gamma_next <= 1.0))
    throw ParseError("gamma_next must lie in [0, 1]", line_number);
  if (!std::isfinite(s.transient_reward) || !std::isfinite(s.terminal_reward))
    throw ParseError("rewards must be finite", line_number);
  s.state_t.resize(n);
  s.state_next.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.state_t[k] = text::parse_real(fields[9 + k], line_number);
    s.state_next[k] = text::parse_real(fields[9 + n + k], line_number);
  }
  return r;
}

std::vector<ExperienceRecord> read_experience_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open experience log " + path.string());
  std::vector<ExperienceRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    records.push_back(parse_record(trimmed, line_number));
  }
  return records;
}

ExperienceLogWriter::ExperienceLogWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
  if (!out_) throw IoError("cannot open experience log " + path.string() + " for writing");
  out_ << "# episode,step,learner,action,r,z,gamma_next,behavior_prob,n,s_t...,s_next...\n";
}

void ExperienceLogWriter::write(const ExperienceRecord& record) {
  out_ << format_record(record) << '\n';
  if (!out_) throw IoError("failed writing experience log");
}

void ExperienceLogWriter::flush() { out_.flush(); }

}  // namespace gvf
