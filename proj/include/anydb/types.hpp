// Core identifiers, row/key representation and small utilities shared by all modules.
#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace anydb {

using AcId = int32_t;
inline constexpr AcId kNoAc = -1;

inline constexpr int32_t kNoClass = -1;

using Clock = std::chrono::steady_clock;
using TimePoint = Clock::time_point;

inline int64_t us_between(TimePoint a, TimePoint b) {
  return std::chrono::duration_cast<std::chrono::microseconds>(b - a).count();
}

// ---------------------------------------------------------------------------
// Errors. Operational failures carry a code so tests can assert the exact kind.
// ---------------------------------------------------------------------------

enum class Err {
  EmptyProgram,
  MalformedProgram,
  InvalidItemCount,
  WrongPartition,
  DuplicateKey,
  KeyNotFound,
  UnknownTable,
  UnknownAc,
  QueueDisconnected,
  InsufficientAcs,
  InvalidPhaseState,
  UnexpectedAck,
  BuildIncomplete,
  BadConfig,
  BadTrace,
  InvariantViolated,
};

const char* err_name(Err e);

struct DbException : std::runtime_error {
  Err code;
  DbException(Err c, const std::string& msg)
      : std::runtime_error(std::string(err_name(c)) + ": " + msg), code(c) {}
};

[[noreturn]] inline void throw_db(Err c, const std::string& msg) { throw DbException(c, msg); }

// ---------------------------------------------------------------------------
// InlineVec: fixed-capacity vector for trivially copyable payloads on the hot
// event path (no heap traffic per event).
// ---------------------------------------------------------------------------

template <typename T, int N>
struct InlineVec {
  std::array<T, N> buf{};
  int8_t len = 0;

  void push_back(const T& t) {
    if (len >= N) throw std::length_error("InlineVec overflow");
    buf[len++] = t;
  }
  void clear() { len = 0; }
  int size() const { return len; }
  static constexpr int capacity() { return N; }
  bool empty() const { return len == 0; }
  const T& back() const { return buf[len - 1]; }
  T& back() { return buf[len - 1]; }
  const T* begin() const { return buf.data(); }
  const T* end() const { return buf.data() + len; }
  T* begin() { return buf.data(); }
  T* end() { return buf.data() + len; }
  const T& operator[](int i) const { return buf[i]; }
  T& operator[](int i) { return buf[i]; }
};

// ---------------------------------------------------------------------------
// Tables and rows. Every cell is an int64; short strings (last names, states)
// are stored as integer codes with decoders for display/CSV.
// ---------------------------------------------------------------------------

enum class TableId : int8_t {
  Warehouse = 0,
  District,
  Customer,
  History,
  Orders,
  NewOrder,
  OrderLine,
  Item,
  Stock,
};
inline constexpr int kTableCount = 9;

const char* table_name(TableId t);
TableId table_from_name(const std::string& s);  // throws UnknownTable

inline constexpr int kMaxCols = 8;

struct Row {
  std::array<int64_t, kMaxCols> v{};
  int8_t n = 0;

  int64_t operator[](int i) const { return v[i]; }
  int64_t& operator[](int i) { return v[i]; }
  int cols() const { return n; }
  bool operator==(const Row& o) const {
    if (n != o.n) return false;
    return std::memcmp(v.data(), o.v.data(), sizeof(int64_t) * n) == 0;
  }
};

inline Row make_row(std::initializer_list<int64_t> vals) {
  Row r;
  for (int64_t x : vals) r.v[r.n++] = x;
  return r;
}

// Column indexes per table, following the schema order used everywhere
// (loader, scans, CSV dumps).
namespace col {
namespace wh { enum { w_id = 0, w_ytd, count_ }; }
namespace dist { enum { d_id = 0, d_w_id, d_ytd, count_ }; }
namespace cust {
enum { c_id = 0, c_d_id, c_w_id, c_last, c_state, c_balance, c_ytd_payment, c_payment_cnt, count_ };
}
namespace hist { enum { h_w_id = 0, h_d_id, h_c_id, h_amount, h_date, count_ }; }
namespace ord { enum { o_id = 0, o_w_id, o_d_id, o_c_id, o_entry_d, count_ }; }
namespace nord { enum { no_o_id = 0, no_w_id, no_d_id, count_ }; }
namespace oline {
enum { ol_o_id = 0, ol_w_id, ol_d_id, ol_number, ol_i_id, ol_amount, ol_quantity, count_ };
}
namespace item { enum { i_id = 0, i_price, count_ }; }
namespace stock { enum { s_i_id = 0, s_w_id, s_quantity, count_ }; }
}  // namespace col

int table_width(TableId t);
const char* const* table_col_names(TableId t);

// ---------------------------------------------------------------------------
// Key packing. All primary keys fit a uint64: [w:16][d:8][rest:40].
// ---------------------------------------------------------------------------

using Key = uint64_t;

inline Key key_wh(int64_t w) { return uint64_t(w) << 48; }
inline Key key_dist(int64_t w, int64_t d) { return (uint64_t(w) << 48) | (uint64_t(d) << 40); }
inline Key key_cust(int64_t w, int64_t d, int64_t c) {
  return (uint64_t(w) << 48) | (uint64_t(d) << 40) | uint64_t(c);
}
inline Key key_order(int64_t w, int64_t d, int64_t o) {
  return (uint64_t(w) << 48) | (uint64_t(d) << 40) | uint64_t(o);
}
inline Key key_oline(int64_t w, int64_t d, int64_t o, int64_t n) {
  return (uint64_t(w) << 48) | (uint64_t(d) << 40) | (uint64_t(o) << 8) | uint64_t(n);
}
inline Key key_item(int64_t i) { return uint64_t(i); }
inline Key key_stock(int64_t w, int64_t i) { return (uint64_t(w) << 48) | uint64_t(i); }

inline int key_warehouse(Key k) { return int(k >> 48); }
inline int key_district(Key k) { return int((k >> 40) & 0xff); }

// ---------------------------------------------------------------------------
// TPC-C style string encodings.
// ---------------------------------------------------------------------------

// Last names: the classic 10-syllable table, codes 0..999.
std::string last_name_string(int code);

// States: two uppercase letters packed as first*26+second, codes 0..675.
inline int state_code(char a, char b) { return (a - 'A') * 26 + (b - 'A'); }
inline std::string state_string(int code) {
  std::string s(2, 'A');
  s[0] = char('A' + code / 26);
  s[1] = char('A' + code % 26);
  return s;
}

// ---------------------------------------------------------------------------
// Hashing (FNV-1a) for state fingerprints.
// ---------------------------------------------------------------------------

inline uint64_t fnv1a_init() { return 0xcbf29ce484222325ull; }
inline uint64_t fnv1a_step(uint64_t h, uint64_t x) {
  for (int i = 0; i < 8; i++) {
    h ^= (x >> (i * 8)) & 0xff;
    h *= 0x100000001b3ull;
  }
  return h;
}
inline uint64_t fnv1a_row(uint64_t h, const Row& r) {
  h = fnv1a_step(h, uint64_t(r.n));
  for (int i = 0; i < r.n; i++) h = fnv1a_step(h, uint64_t(r.v[i]));
  return h;
}

}  // namespace anydb
