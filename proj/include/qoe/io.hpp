#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "qoe/core.hpp"

namespace qoe {

using ordered_json = nlohmann::ordered_json;

// JSON encodings. Key order is canonical (insertion order of the encoders):
//   RatingRecord: session_id, rater_id, question_id, category, content{density, accuracy},
//                 qos{speed, pause_pos, pause_dur}, scores{overall, content, response}, timestamp
ordered_json to_json(const QosConfig& qos);
ordered_json to_json(const ContentConfig& content);
ordered_json to_json(const RaterProfile& profile);
ordered_json to_json(const RatingRecord& record);
ordered_json to_json(const ExperimentGrid& grid);
ordered_json to_json(const ContentFixture& fixture);

QosConfig qos_from_json(const ordered_json& j);
ContentConfig content_from_json(const ordered_json& j);
RaterProfile profile_from_json(const ordered_json& j);
RatingRecord record_from_json(const ordered_json& j);
ExperimentGrid grid_from_json(const ordered_json& j);
ContentFixture content_fixture_from_json(const ordered_json& j);
std::map<Dimension, int> scores_from_json(const ordered_json& j);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& data);

ExperimentGrid load_grid(const std::filesystem::path& path);
ContentFixture load_content(const std::filesystem::path& path);

/// One record per line; blank lines are skipped. Malformed lines raise
/// Error("bad-record") naming the line number.
std::vector<RatingRecord> read_records(std::istream& in);
std::vector<RatingRecord> load_records(const std::filesystem::path& path);
std::string records_to_jsonl(const std::vector<RatingRecord>& records);
void save_records(const std::filesystem::path& path, const std::vector<RatingRecord>& records);

std::vector<RaterProfile> load_profiles(const std::filesystem::path& path);
void save_profiles(const std::filesystem::path& path, const std::vector<RaterProfile>& profiles);

/// mos.csv: question_id,density,accuracy,speed,pause_pos,pause_dur,dimension,mos_z,mos_scaled,n_valid
/// Lines starting with `#` are comments (used for metadata headers).
std::string mos_to_csv(const MosTable& table);
MosTable mos_from_csv(const std::string& csv);

ordered_json to_json(const RescaleAnchors& anchors);
RescaleAnchors anchors_from_json(const ordered_json& j);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace qoe
