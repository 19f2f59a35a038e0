#include "gliopipe/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>

namespace gliopipe::nifti {

namespace {

// NIfTI-1 header, 348 bytes (nifti1.h layout).
#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t DT_UINT8 = 2;
constexpr std::int16_t DT_INT16 = 4;
constexpr std::int16_t DT_INT32 = 8;
constexpr std::int16_t DT_FLOAT32 = 16;
constexpr std::int16_t DT_FLOAT64 = 64;
constexpr std::int16_t DT_UINT16 = 512;

struct GzFile {
  gzFile f = nullptr;
  explicit GzFile(const std::string& path, const char* mode) {
    f = gzopen(path.c_str(), mode);
  }
  ~GzFile() {
    if (f) gzclose(f);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;
};

void read_exact(gzFile f, void* buf, std::size_t n, const std::string& path) {
  int got = gzread(f, buf, static_cast<unsigned>(n));
  if (got < 0 || std::size_t(got) != n)
    throw IoError("truncated or unreadable NIfTI file: " + path);
}

void write_exact(gzFile f, const void* buf, std::size_t n, const std::string& path) {
  if (gzwrite(f, buf, static_cast<unsigned>(n)) != int(n))
    throw IoError("failed writing NIfTI file: " + path);
}

template <typename T>
void convert(const std::vector<char>& raw, std::vector<float>& out) {
  const T* src = reinterpret_cast<const T*>(raw.data());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(src[i]);
}

Nifti1Header blank_header(const Dim3& dim, const Spacing& sp, std::int16_t dtype,
                          std::int16_t bits) {
  Nifti1Header h;
  std::memset(&h, 0, sizeof(h));
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<std::int16_t>(dim[0]);
  h.dim[2] = static_cast<std::int16_t>(dim[1]);
  h.dim[3] = static_cast<std::int16_t>(dim[2]);
  h.dim[4] = h.dim[5] = h.dim[6] = h.dim[7] = 1;
  h.datatype = dtype;
  h.bitpix = bits;
  h.pixdim[0] = 1.f;
  h.pixdim[1] = static_cast<float>(sp[0]);
  h.pixdim[2] = static_cast<float>(sp[1]);
  h.pixdim[3] = static_cast<float>(sp[2]);
  h.vox_offset = 352.f;
  h.scl_slope = 1.f;
  h.xyzt_units = 2;  // millimetres
  h.sform_code = 1;
  h.srow_x[0] = static_cast<float>(sp[0]);
  h.srow_y[1] = static_cast<float>(sp[1]);
  h.srow_z[2] = static_cast<float>(sp[2]);
  std::memcpy(h.magic, "n+1", 4);
  return h;
}

bool wants_gzip(const std::string& path) { return path.size() > 3 && path.ends_with(".gz"); }

}  // namespace

Volume read_volume(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path);
  GzFile file(path, "rb");
  if (!file.f) throw IoError("cannot open: " + path);

  Nifti1Header h;
  read_exact(file.f, &h, sizeof(h), path);
  if (h.sizeof_hdr != 348)
    throw IoError("not a little-endian NIfTI-1 file: " + path);
  if (h.dim[0] < 3 || h.dim[1] <= 0 || h.dim[2] <= 0 || h.dim[3] <= 0)
    throw IoError("unsupported NIfTI dimensionality in " + path);
  for (int k = 4; k <= h.dim[0] && k < 8; ++k)
    if (h.dim[k] > 1) throw IoError("multi-frame NIfTI not supported: " + path);

  Volume v;
  v.dim = {h.dim[1], h.dim[2], h.dim[3]};
  for (int k = 0; k < 3; ++k) {
    float p = h.pixdim[k + 1];
    v.spacing[k] = (std::isfinite(p) && p > 0.f) ? double(p) : 1.0;
  }

  const std::size_t n = voxel_count(v.dim);
  std::size_t elem;
  switch (h.datatype) {
    case DT_UINT8: elem = 1; break;
    case DT_INT16: case DT_UINT16: elem = 2; break;
    case DT_INT32: case DT_FLOAT32: elem = 4; break;
    case DT_FLOAT64: elem = 8; break;
    default:
      throw IoError("unsupported NIfTI datatype " + std::to_string(h.datatype) +
                    " in " + path);
  }

  // skip any header extensions up to vox_offset
  long offset = long(h.vox_offset);
  if (offset < 348) offset = 348;
  long skip = offset - long(sizeof(h));
  if (skip > 0) {
    std::vector<char> junk(static_cast<std::size_t>(skip), '\0');
    read_exact(file.f, junk.data(), junk.size(), path);
  }

  std::vector<char> raw(n * elem);
  read_exact(file.f, raw.data(), raw.size(), path);

  v.data.resize(n);
  switch (h.datatype) {
    case DT_UINT8: convert<std::uint8_t>(raw, v.data); break;
    case DT_INT16: convert<std::int16_t>(raw, v.data); break;
    case DT_UINT16: convert<std::uint16_t>(raw, v.data); break;
    case DT_INT32: convert<std::int32_t>(raw, v.data); break;
    case DT_FLOAT32: convert<float>(raw, v.data); break;
    case DT_FLOAT64: convert<double>(raw, v.data); break;
  }

  if (h.scl_slope != 0.f && !(h.scl_slope == 1.f && h.scl_inter == 0.f))
    for (float& x : v.data) x = x * h.scl_slope + h.scl_inter;

  for (float x : v.data)
    if (std::isnan(x)) throw IoError("NaN voxel in " + path);
  return v;
}

void write_volume(const std::string& path, const Volume& v) {
  GzFile file(path, wants_gzip(path) ? "wb" : "wbT");
  if (!file.f) throw IoError("cannot create: " + path);
  Nifti1Header h = blank_header(v.dim, v.spacing, DT_FLOAT32, 32);
  write_exact(file.f, &h, sizeof(h), path);
  const char pad[4] = {0, 0, 0, 0};
  write_exact(file.f, pad, 4, path);
  write_exact(file.f, v.data.data(), v.data.size() * sizeof(float), path);
}

void write_labels(const std::string& path, const Dim3& dim, const Spacing& sp,
                  const std::vector<std::uint8_t>& labels) {
  if (labels.size() != voxel_count(dim))
    throw ShapeError("label buffer does not match dimensions");
  GzFile file(path, wants_gzip(path) ? "wb" : "wbT");
  if (!file.f) throw IoError("cannot create: " + path);
  Nifti1Header h = blank_header(dim, sp, DT_UINT8, 8);
  write_exact(file.f, &h, sizeof(h), path);
  const char pad[4] = {0, 0, 0, 0};
  write_exact(file.f, pad, 4, path);
  write_exact(file.f, labels.data(), labels.size(), path);
}

}  // namespace gliopipe::nifti
