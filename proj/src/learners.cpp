#include "gvf/learners.hpp"

#include <cstring>
#include <fstream>

#include "gvf/weight_io.hpp"

namespace gvf {

GreedyGqState GreedyGqState::zeros(std::size_t dimension, double alpha_theta, double alpha_w, TraceSettings trace) {
  require(alpha_theta > 0.0 && alpha_w >= 0.0, "GreedyGqState: step sizes must be positive");
  GreedyGqState st;
  st.theta = Weights::Zero(static_cast<Eigen::Index>(dimension));
  st.w = Weights::Zero(static_cast<Eigen::Index>(dimension));
  st.e = Trace(dimension, trace.capacity, trace.prune_threshold);
  st.alpha_theta = alpha_theta;
  st.alpha_w = alpha_w;
  return st;
}

void GreedyGqState::refresh_norms() {
  theta_sq_norm = theta.squaredNorm();
  w_sq_norm = w.squaredNorm();
}

OffPacState OffPacState::zeros(std::size_t state_dimension, std::size_t policy_dimension, double alpha_v,
                               double alpha_w, double alpha_u, TraceSettings trace) {
  require(alpha_v > 0.0 && alpha_w >= 0.0 && alpha_u >= 0.0, "OffPacState: step sizes must be nonnegative");
  OffPacState st;
  st.v = Weights::Zero(static_cast<Eigen::Index>(state_dimension));
  st.w = Weights::Zero(static_cast<Eigen::Index>(state_dimension));
  st.u = Weights::Zero(static_cast<Eigen::Index>(policy_dimension));
  st.e_v = Trace(state_dimension, trace.capacity, trace.prune_threshold);
  st.e_u = Trace(policy_dimension, trace.capacity, trace.prune_threshold);
  st.alpha_v = alpha_v;
  st.alpha_w = alpha_w;
  st.alpha_u = alpha_u;
  return st;
}

void OffPacState::refresh_norms() {
  v_sq_norm = v.squaredNorm();
  w_sq_norm = w.squaredNorm();
  u_sq_norm = u.squaredNorm();
}

namespace {

constexpr char kCheckpointMagic[4] = {'G', 'V', 'F', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_header(std::ostream& out, Algorithm algorithm, std::uint64_t samples, const std::vector<double>& hyper) {
  out.write(kCheckpointMagic, 4);
  le::put_u32(out, kCheckpointVersion);
  le::put_u32(out, static_cast<std::uint32_t>(algorithm));
  le::put_u64(out, samples);
  le::put_u32(out, static_cast<std::uint32_t>(hyper.size()));
  for (double h : hyper) le::put_f64(out, h);
}

void write_blocks(std::ostream& out, std::initializer_list<const Weights*> blocks) {
  le::put_u32(out, static_cast<std::uint32_t>(blocks.size()));
  for (const Weights* w : blocks) write_weights(out, *w, WeightEncoding::kSparse);
}

TraceSettings trace_settings(double capacity, double prune) {
  if (!(capacity >= 1.0) || !(prune >= 0.0)) throw IoError("checkpoint has invalid trace settings");
  return {static_cast<std::size_t>(capacity), prune};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const LearnerState& learner) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::visit(
      [&](const auto& st) {
        using S = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<S, GreedyGqState>) {
          write_header(out, Algorithm::kGreedyGq, st.samples,
                       {st.alpha_theta, st.alpha_w, static_cast<double>(st.e.capacity()), st.e.prune_threshold()});
          write_blocks(out, {&st.theta, &st.w});
        } else {
          write_header(out, Algorithm::kOffPac, st.samples,
                       {st.alpha_v, st.alpha_w, st.alpha_u, static_cast<double>(st.e_v.capacity()),
                        st.e_v.prune_threshold()});
          write_blocks(out, {&st.v, &st.w, &st.u});
        }
      },
      learner);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

LearnerState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw IoError(path.string() + ": not a checkpoint");
  if (le::get_u32(in) != kCheckpointVersion) throw IoError(path.string() + ": unsupported checkpoint version");
  const auto algorithm = static_cast<Algorithm>(le::get_u32(in));
  const std::uint64_t samples = le::get_u64(in);
  std::vector<double> hyper(le::get_u32(in));
  for (double& h : hyper) h = le::get_f64(in);
  std::vector<Weights> blocks(le::get_u32(in));
  for (Weights& w : blocks) w = read_weights(in);

  if (algorithm == Algorithm::kGreedyGq) {
    if (hyper.size() != 4 || blocks.size() != 2 || blocks[0].size() != blocks[1].size())
      throw IoError(path.string() + ": malformed Greedy-GQ checkpoint");
    GreedyGqState st = GreedyGqState::zeros(static_cast<std::size_t>(blocks[0].size()), hyper[0], hyper[1],
                                            trace_settings(hyper[2], hyper[3]));
    st.theta = std::move(blocks[0]);
    st.w = std::move(blocks[1]);
    st.samples = samples;
    st.refresh_norms();
    return st;
  }
  if (algorithm == Algorithm::kOffPac) {
    if (hyper.size() != 5 || blocks.size() != 3 || blocks[0].size() != blocks[1].size())
      throw IoError(path.string() + ": malformed Off-PAC checkpoint");
    OffPacState st =
        OffPacState::zeros(static_cast<std::size_t>(blocks[0].size()), static_cast<std::size_t>(blocks[2].size()),
                           hyper[0], hyper[1], hyper[2], trace_settings(hyper[3], hyper[4]));
    st.v = std::move(blocks[0]);
    st.w = std::move(blocks[1]);
    st.u = std::move(blocks[2]);
    st.samples = samples;
    st.refresh_norms();
    return st;
  }
  throw IoError(path.string() + ": unknown algorithm id");
}

}  // namespace gvf
