#include "ptrn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace ptrn {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'R', 'N'};

struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw StageError("checkpoint", "cannot open for writing: " + path);
  }
  void bytes(const void* p, size_t n) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u16(uint16_t v) { bytes(&v, 2); }
  void u32(uint32_t v) { bytes(&v, 4); }
  void u64(uint64_t v) { bytes(&v, 8); }
  void str(const std::string& s) {
    if (s.size() > 0xffff) throw StageError("checkpoint", "string too long");
    u16(static_cast<uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

struct Reader {
  std::ifstream in;
  explicit Reader(const std::string& path) : in(path, std::ios::binary) {
    if (!in) throw CorruptCheckpoint("cannot open: " + path);
  }
  void bytes(void* p, size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) throw CorruptCheckpoint("truncated file");
  }
  uint16_t u16() { uint16_t v; bytes(&v, 2); return v; }
  uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
  uint64_t u64() { uint64_t v; bytes(&v, 8); return v; }
  std::string str() {
    const uint16_t n = u16();
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }
};

struct Entry {
  std::string name;
  const Mat* mat = nullptr;
  const Vec* vec = nullptr;
  Eigen::Index rows() const { return mat ? mat->rows() : vec->rows(); }
  Eigen::Index cols() const { return mat ? mat->cols() : 1; }
};

std::vector<Entry> weight_table(const Checkpoint& c) {
  std::vector<Entry> t;
  auto add_m = [&](const std::string& n, const Mat& m) { t.push_back({n, &m, nullptr}); };
  auto add_v = [&](const std::string& n, const Vec& v) { t.push_back({n, nullptr, &v}); };
  add_m("embedding", c.params.embedding);
  add_m("positional", c.params.positional);
  for (size_t l = 0; l < c.params.layers.size(); ++l) {
    const auto& lw = c.params.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    add_m(p + "wq", lw.wq); add_v(p + "bq", lw.bq);
    add_m(p + "wk", lw.wk); add_v(p + "bk", lw.bk);
    add_m(p + "wv", lw.wv); add_v(p + "bv", lw.bv);
    add_m(p + "wo", lw.wo); add_v(p + "bo", lw.bo);
    add_v(p + "ln1_g", lw.ln1_g); add_v(p + "ln1_b", lw.ln1_b);
    add_v(p + "ln2_g", lw.ln2_g); add_v(p + "ln2_b", lw.ln2_b);
    add_m(p + "w1", lw.w1); add_v(p + "b1", lw.b1);
    add_m(p + "w2", lw.w2); add_v(p + "b2", lw.b2);
  }
  add_v("lnf_g", c.params.lnf_g);
  add_v("lnf_b", c.params.lnf_b);
  if (c.has_head) {
    add_m("head.w", c.head_w);
    add_v("head.b", c.head_b);
  }
  return t;
}

void write_row_major(Writer& w, const Entry& e) {
  if (e.vec) {
    w.bytes(e.vec->data(), sizeof(double) * static_cast<size_t>(e.vec->size()));
    return;
  }
  const Mat& m = *e.mat;
  std::vector<double> row(static_cast<size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<size_t>(j)] = m(i, j);
    w.bytes(row.data(), sizeof(double) * row.size());
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  c.config.validate();
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<uint32_t>(c.config.d_model));
  w.u32(static_cast<uint32_t>(c.config.n_layers));
  w.u32(static_cast<uint32_t>(c.config.n_heads));
  w.u32(static_cast<uint32_t>(c.config.ffn_dim));
  w.u32(static_cast<uint32_t>(c.config.max_len));
  w.u32(static_cast<uint32_t>(c.config.vocab_size));
  w.u64(c.config.seed);
  w.u32(c.has_head ? 1u : 0u);
  w.u32(static_cast<uint32_t>(c.head_labels));

  w.u32(static_cast<uint32_t>(c.vocab.tokens.size()));
  for (const auto& t : c.vocab.tokens) w.str(t);
  w.u32(static_cast<uint32_t>(c.vocab.pad_id));
  w.u32(static_cast<uint32_t>(c.vocab.cls_id));
  w.u32(static_cast<uint32_t>(c.vocab.unk_id));
  w.u32(static_cast<uint32_t>(c.vocab.word_dictionary.size()));
  for (const auto& d : c.vocab.word_dictionary) w.str(d);

  const auto table = weight_table(c);
  w.u32(static_cast<uint32_t>(table.size()));
  uint64_t offset = 0;
  for (const auto& e : table) {
    w.str(e.name);
    w.u32(static_cast<uint32_t>(e.rows()));
    w.u32(static_cast<uint32_t>(e.cols()));
    w.u64(offset);
    offset += sizeof(double) * static_cast<uint64_t>(e.rows()) * static_cast<uint64_t>(e.cols());
  }
  for (const auto& e : table) write_row_major(w, e);
  if (!w.out) throw StageError("checkpoint", "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CorruptCheckpoint("bad magic");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointVersionMismatch("unsupported version " + std::to_string(version));

  Checkpoint c;
  c.config.d_model = static_cast<int>(r.u32());
  c.config.n_layers = static_cast<int>(r.u32());
  c.config.n_heads = static_cast<int>(r.u32());
  c.config.ffn_dim = static_cast<int>(r.u32());
  c.config.max_len = static_cast<int>(r.u32());
  c.config.vocab_size = static_cast<int>(r.u32());
  c.config.seed = r.u64();
  c.has_head = r.u32() != 0;
  c.head_labels = static_cast<int>(r.u32());
  c.config.validate();

  const uint32_t n_tokens = r.u32();
  c.vocab.tokens.resize(n_tokens);
  for (auto& t : c.vocab.tokens) t = r.str();
  c.vocab.pad_id = static_cast<int>(r.u32());
  c.vocab.cls_id = static_cast<int>(r.u32());
  c.vocab.unk_id = static_cast<int>(r.u32());
  const uint32_t n_words = r.u32();
  c.vocab.word_dictionary.resize(n_words);
  for (auto& d : c.vocab.word_dictionary) d = r.str();
  c.vocab.rebuild_index();
  c.vocab.validate();

  c.params.layers.resize(static_cast<size_t>(c.config.n_layers));
  if (c.has_head) {
    c.head_w.resize(c.config.d_model, c.head_labels);
    c.head_b.resize(c.head_labels);
  }
  auto table = weight_table(c);

  const uint32_t entries = r.u32();
  if (entries != table.size()) throw CorruptCheckpoint("unexpected weight table size");
  struct Meta { std::string name; uint32_t rows, cols; uint64_t offset; };
  std::vector<Meta> metas(entries);
  for (auto& m : metas) {
    m.name = r.str();
    m.rows = r.u32();
    m.cols = r.u32();
    m.offset = r.u64();
  }
  uint64_t expect_offset = 0;
  for (size_t i = 0; i < metas.size(); ++i) {
    if (metas[i].name != table[i].name) throw CorruptCheckpoint("weight name mismatch: " + metas[i].name);
    if (metas[i].offset != expect_offset) throw CorruptCheckpoint("bad offset for " + metas[i].name);
    expect_offset += sizeof(double) * static_cast<uint64_t>(metas[i].rows) * metas[i].cols;
  }

  for (size_t i = 0; i < metas.size(); ++i) {
    const auto rows = static_cast<Eigen::Index>(metas[i].rows);
    const auto cols = static_cast<Eigen::Index>(metas[i].cols);
    Mat* mat = const_cast<Mat*>(table[i].mat);
    Vec* vec = const_cast<Vec*>(table[i].vec);
    if (vec) {
      if (cols != 1) throw CorruptCheckpoint("vector entry with cols != 1: " + metas[i].name);
      vec->resize(rows);
      r.bytes(vec->data(), sizeof(double) * static_cast<size_t>(rows));
    } else {
      mat->resize(rows, cols);
      std::vector<double> row(static_cast<size_t>(cols));
      for (Eigen::Index ri = 0; ri < rows; ++ri) {
        r.bytes(row.data(), sizeof(double) * row.size());
        for (Eigen::Index cj = 0; cj < cols; ++cj) (*mat)(ri, cj) = row[static_cast<size_t>(cj)];
      }
    }
  }
  return c;
}

Checkpoint make_checkpoint(const EncoderModel& model, const Vocab& vocab) {
  Checkpoint c;
  c.config = model.config();
  c.params = model.params();
  c.vocab = vocab;
  return c;
}

}  // namespace ptrn
