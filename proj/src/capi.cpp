// C API shim: wraps the C++ core in exception-free, handle-based calls.

#include "singletfb/sfb.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "config.hpp"
#include "runner.hpp"

using namespace sfb;

struct sfb_config {
  RunConfig cfg;
};

struct sfb_result {
  RVec times, fidelities, traces, purities, min_eigs;
  Mat final_rho;
  std::map<std::string, double> scalars;
};

namespace {

void set_error(sfb_error* err, int code, const char* msg) {
  if (!err) return;
  err->code = code;
  std::strncpy(err->message, msg, sizeof(err->message) - 1);
  err->message[sizeof(err->message) - 1] = '\0';
}

void clear_error(sfb_error* err) { set_error(err, SFB_OK, ""); }

template <typename Fn>
int guarded(sfb_error* err, Fn&& fn) {
  try {
    clear_error(err);
    fn();
    return SFB_OK;
  } catch (const Error& e) {
    set_error(err, int(e.code()), e.what());
    return int(e.code());
  } catch (const std::exception& e) {
    set_error(err, SFB_E_INTERNAL, e.what());
    return SFB_E_INTERNAL;
  } catch (...) {
    set_error(err, SFB_E_INTERNAL, "unknown exception");
    return SFB_E_INTERNAL;
  }
}

int copy_string(const std::string& s, char* buf, size_t buf_len, size_t* needed, sfb_error* err) {
  if (needed) *needed = s.size() + 1;
  if (!buf) {
    set_error(err, SFB_E_INVALID, "output buffer is NULL");
    return SFB_E_INVALID;
  }
  if (buf_len < s.size() + 1) {
    set_error(err, SFB_E_BUFFER, "buffer too small");
    return SFB_E_BUFFER;
  }
  std::memcpy(buf, s.data(), s.size());
  buf[s.size()] = '\0';
  return SFB_OK;
}

}  // namespace

extern "C" {

int sfb_config_parse(const char* text, sfb_config** out_cfg, sfb_error* err) {
  if (!text || !out_cfg) {
    set_error(err, SFB_E_INVALID, "NULL argument");
    return SFB_E_INVALID;
  }
  *out_cfg = nullptr;
  return guarded(err, [&] {
    auto handle = std::make_unique<sfb_config>();
    handle->cfg = config::parse_config(text, /*require_complete=*/false);
    *out_cfg = handle.release();
  });
}

int sfb_config_parse_file(const char* path, sfb_config** out_cfg, sfb_error* err) {
  if (!path || !out_cfg) {
    set_error(err, SFB_E_INVALID, "NULL argument");
    return SFB_E_INVALID;
  }
  *out_cfg = nullptr;
  return guarded(err, [&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Err::Io, std::string("cannot open config file '") + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    auto handle = std::make_unique<sfb_config>();
    handle->cfg = config::parse_config(text.str(), /*require_complete=*/false);
    *out_cfg = handle.release();
  });
}

int sfb_config_set(sfb_config* cfg, const char* key, const char* value, sfb_error* err) {
  if (!cfg || !key || !value) {
    set_error(err, SFB_E_INVALID, "NULL argument");
    return SFB_E_INVALID;
  }
  return guarded(err, [&] { config::apply_key(cfg->cfg, key, value); });
}

void sfb_config_free(sfb_config* cfg) { delete cfg; }

int sfb_preset(const char* name, char* buf, size_t buf_len, size_t* needed, sfb_error* err) {
  if (!name) {
    set_error(err, SFB_E_INVALID, "NULL preset name");
    return SFB_E_INVALID;
  }
  try {
    clear_error(err);
    return copy_string(config::preset(name), buf, buf_len, needed, err);
  } catch (const Error& e) {
    set_error(err, int(e.code()), e.what());
    return int(e.code());
  }
}

int sfb_preset_names(char* buf, size_t buf_len, size_t* needed, sfb_error* err) {
  std::string joined;
  for (const auto& n : config::preset_names()) joined += (joined.empty() ? "" : ",") + n;
  clear_error(err);
  return copy_string(joined, buf, buf_len, needed, err);
}

int sfb_run(const sfb_config* cfg, const char* out_path, char* summary, size_t summary_len,
            sfb_error* err) {
  if (!cfg) {
    set_error(err, SFB_E_INVALID, "NULL config");
    return SFB_E_INVALID;
  }
  return guarded(err, [&] {
    const std::string s = runner::run(cfg->cfg, out_path ? out_path : "");
    if (summary && summary_len > 0) {
      const size_t n = std::min(summary_len - 1, s.size());
      std::memcpy(summary, s.data(), n);
      summary[n] = '\0';
    }
  });
}

int sfb_solve_steady(const sfb_config* cfg, sfb_result** out_res, sfb_error* err) {
  if (!cfg || !out_res) {
    set_error(err, SFB_E_INVALID, "NULL argument");
    return SFB_E_INVALID;
  }
  *out_res = nullptr;
  return guarded(err, [&] {
    RunConfig run_cfg = cfg->cfg;
    config::finalize(run_cfg);
    const Generator gen = runner::build_generator(run_cfg);
    const Mat rho = runner::compute_steady(run_cfg, gen);
    const Index mode_dim = gen.dim / model::kAtomDim;
    const Mat atoms =
        mode_dim > 1 ? opalg::partial_trace_right(rho, model::kAtomDim, mode_dim) : rho;
    auto res = std::make_unique<sfb_result>();
    res->final_rho = rho;
    res->scalars["fidelity"] = analysis::fidelity(model::singlet_state(), atoms);
    res->scalars["purity"] = rho.squaredNorm();
    res->scalars["trace"] = rho.trace().real();
    res->scalars["min_eig"] = opalg::min_eigenvalue(rho);
    *out_res = res.release();
  });
}

int sfb_solve_evolve(const sfb_config* cfg, sfb_result** out_res, sfb_error* err) {
  if (!cfg || !out_res) {
    set_error(err, SFB_E_INVALID, "NULL argument");
    return SFB_E_INVALID;
  }
  *out_res = nullptr;
  return guarded(err, [&] {
    RunConfig run_cfg = cfg->cfg;
    config::finalize(run_cfg);
    const Generator gen = runner::build_generator(run_cfg);
    const auto evo = runner::compute_evolve(run_cfg, gen);
    auto res = std::make_unique<sfb_result>();
    const double unit = config::unit_rate(run_cfg);
    res->times = evo.times * unit;
    res->fidelities = evo.fidelities;
    res->traces = evo.traces;
    res->purities = evo.purities;
    res->min_eigs = evo.min_eigs;
    res->final_rho = evo.final_rho;
    const Index last = evo.fidelities.size() - 1;
    res->scalars["fidelity"] = evo.fidelities(last);
    res->scalars["purity"] = evo.purities(last);
    res->scalars["trace"] = evo.traces(last);
    res->scalars["min_eig"] = evo.min_eigs(last);
    *out_res = res.release();
  });
}

int sfb_result_dim(const sfb_result* res) {
  if (!res) return 0;
  return int(res->final_rho.rows());
}

size_t sfb_result_series_length(const sfb_result* res) {
  if (!res) return 0;
  return size_t(res->times.size());
}

int sfb_result_series(const sfb_result* res, const char* field, double* buf, size_t len,
                      sfb_error* err) {
  if (!res || !field || !buf) {
    set_error(err, SFB_E_INVALID, "NULL argument");
    return SFB_E_INVALID;
  }
  clear_error(err);
  const std::string f = field;
  const RVec* src = nullptr;
  if (f == "t") src = &res->times;
  else if (f == "fidelity") src = &res->fidelities;
  else if (f == "trace") src = &res->traces;
  else if (f == "purity") src = &res->purities;
  else if (f == "min_eig") src = &res->min_eigs;
  if (!src) {
    set_error(err, SFB_E_INVALID, "unknown series field");
    return SFB_E_INVALID;
  }
  if (len < size_t(src->size())) {
    set_error(err, SFB_E_BUFFER, "series buffer too small");
    return SFB_E_BUFFER;
  }
  for (Index i = 0; i < src->size(); ++i) buf[i] = (*src)(i);
  return SFB_OK;
}

double sfb_result_scalar(const sfb_result* res, const char* field) {
  if (!res || !field) return std::numeric_limits<double>::quiet_NaN();
  const auto it = res->scalars.find(field);
  if (it == res->scalars.end()) return std::numeric_limits<double>::quiet_NaN();
  return it->second;
}

int sfb_result_final_rho(const sfb_result* res, double* buf, size_t len, sfb_error* err) {
  if (!res || !buf) {
    set_error(err, SFB_E_INVALID, "NULL argument");
    return SFB_E_INVALID;
  }
  clear_error(err);
  const Index d = res->final_rho.rows();
  if (len < size_t(2 * d * d)) {
    set_error(err, SFB_E_BUFFER, "matrix buffer too small");
    return SFB_E_BUFFER;
  }
  size_t k = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) {
      buf[k++] = res->final_rho(i, j).real();
      buf[k++] = res->final_rho(i, j).imag();
    }
  return SFB_OK;
}

void sfb_result_free(sfb_result* res) { delete res; }

const char* sfb_status_name(int code) {
  if (code == SFB_OK) return "OK";
  return err_name(Err(code));
}

const char* sfb_version(void) { return "0.1.0"; }

int sfb_exit_code(int status) {
  switch (status) {
    case SFB_OK: return 0;
    case SFB_E_PARSE:
    case SFB_E_UNKNOWN_KEY:
    case SFB_E_RANGE:
    case SFB_E_IO:
    case SFB_E_INVALID:
    case SFB_E_BUFFER: return 1;
    default: return 2;
  }
}

}  // extern "C"
