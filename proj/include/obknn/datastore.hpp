#pragma once

// The open-book key-value datastore: an ordered collection of
// (embedding, label id) pairs with add/edit/delete, exact k-nearest-neighbor
// search, and a little-endian binary file format.
//
// File layout (all integers little-endian):
//   magic   "OBKD"           4 bytes
//   version u16              currently 1
//   dim     u32              0 only for an empty store
//   count   u64              number of entries
//   labels  u32 count, then per name: u32 byte length + UTF-8 bytes,
//           then i32 NA-label index (-1 = unset)
//   body    per entry: u64 id, u32 label id, dim x f32 key
//
// Search is exact (a full scan), so results are identical to a linear-scan
// oracle by construction; ties on distance order by ascending entry id.
// Const queries are safe from any number of threads; mutations need
// exclusive access.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "obknn/core.hpp"
#include "obknn/errors.hpp"

namespace obknn {

struct DatastoreEntry {
    std::uint64_t id;
    Embedding key;
    std::uint32_t value;  // label id

    bool operator==(const DatastoreEntry& other) const = default;
};

struct Neighbor {
    std::uint64_t entry_id;
    std::uint32_t label_id;
    double distance;
};

// Result of a k-nearest-neighbor query: ascending by distance, ties by
// ascending entry id, length min(k, store size).
struct NeighborSet {
    std::vector<Neighbor> neighbors;

    std::size_t size() const { return neighbors.size(); }
    bool empty() const { return neighbors.empty(); }
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

// Cursor over a loaded file image; every read error names the offset.
class ByteReader {
public:
    ByteReader(std::span<const char> data, const std::string& path)
        : data_(data), path_(path) {}

    std::size_t offset() const { return pos_; }

    void require(std::size_t n, const char* what) {
        if (pos_ + n > data_.size()) {
            throw FormatError(path_ + ": truncated while reading " + what +
                              " at offset " + std::to_string(pos_));
        }
    }

    void read_bytes(void* dst, std::size_t n, const char* what) {
        require(n, what);
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
    }

    std::uint16_t u16(const char* what) {
        unsigned char b[2];
        read_bytes(b, 2, what);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }

    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        read_bytes(b, 4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::uint64_t u64(const char* what) {
        std::uint64_t v = 0;
        unsigned char b[8];
        read_bytes(b, 8, what);
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }

    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    bool exhausted() const { return pos_ == data_.size(); }

private:
    std::span<const char> data_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace detail

class Datastore {
public:
    static constexpr char kMagic[4] = {'O', 'B', 'K', 'D'};
    static constexpr std::uint16_t kFormatVersion = 1;

    explicit Datastore(LabelTable labels) : labels_(std::move(labels)) {}

    // Builds a store holding exactly the given pairs, ids 0..n-1 in input
    // order. All records must share one dimension and carry valid label ids.
    static Datastore build(std::span<const std::pair<Embedding, std::uint32_t>> records,
                           LabelTable labels) {
        Datastore store(std::move(labels));
        store.entries_.reserve(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& [key, value] = records[i];
            if (store.dim_ != 0 && key.dim() != store.dim_) {
                throw DimensionError("build: record " + std::to_string(i) + " has dim " +
                                     std::to_string(key.dim()) + ", expected " +
                                     std::to_string(store.dim_));
            }
            if (value >= store.labels_.size()) {
                throw InvalidArgumentError("build: record " + std::to_string(i) +
                                           " has invalid label id " + std::to_string(value));
            }
            if (store.dim_ == 0) store.dim_ = static_cast<std::uint32_t>(key.dim());
            store.entries_.push_back({store.next_id_++, key, value});
        }
        return store;
    }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    // 0 until the first entry fixes the dimension.
    std::uint32_t dim() const { return dim_; }
    const LabelTable& labels() const { return labels_; }
    const std::vector<DatastoreEntry>& entries() const { return entries_; }
    std::uint64_t next_id() const { return next_id_; }

    bool operator==(const Datastore& other) const {
        return dim_ == other.dim_ && labels_ == other.labels_ && entries_ == other.entries_;
    }

    // Appends an entry under a fresh id (never reused, even after deletes).
    std::uint64_t add(Embedding key, std::uint32_t value) {
        if (dim_ != 0 && key.dim() != dim_) {
            throw DimensionError("add: key has dim " + std::to_string(key.dim()) +
                                 ", datastore dim is " + std::to_string(dim_));
        }
        if (value >= labels_.size()) {
            throw InvalidArgumentError("add: invalid label id " + std::to_string(value));
        }
        if (dim_ == 0) dim_ = static_cast<std::uint32_t>(key.dim());
        const std::uint64_t id = next_id_++;
        entries_.push_back({id, std::move(key), value});
        return id;
    }

    // Replaces the label of an existing entry; the key is untouched.
    void edit(std::uint64_t id, std::uint32_t new_value) {
        if (new_value >= labels_.size()) {
            throw InvalidArgumentError("edit: invalid label id " + std::to_string(new_value));
        }
        entry_at(id).value = new_value;
    }

    // Removes an entry. Its id is retired: queries never return it and
    // later adds get fresh ids.
    void remove(std::uint64_t id) {
        const std::size_t idx = index_of(id);
        entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(idx));
    }

    const DatastoreEntry& entry(std::uint64_t id) const {
        return const_cast<Datastore*>(this)->entry_at(id);
    }

    // Exact k-nearest-neighbor search: the min(k, size) closest entries
    // under `metric`, ascending distance, ties by ascending entry id.
    NeighborSet knn_query(const Embedding& query, std::uint32_t k, Metric metric) const {
        if (entries_.empty()) {
            throw EmptyDatastoreError("knn_query: datastore is empty");
        }
        if (query.dim() != dim_) {
            throw DimensionError("knn_query: query has dim " + std::to_string(query.dim()) +
                                 ", datastore dim is " + std::to_string(dim_));
        }
        if (k < 1) {
            throw InvalidArgumentError("knn_query: k must be >= 1");
        }

        // Ranking happens in squared space for the Euclidean metrics (the
        // square root is order-preserving and applied once at the end).
        const bool euclidean = metric != Metric::OneMinusCosine;
        double query_norm_sq = 0.0;
        if (!euclidean) {
            for (float v : query.values()) query_norm_sq += static_cast<double>(v) * v;
            if (query_norm_sq == 0.0) {
                throw DegenerateInputError(
                    "knn_query: cosine distance undefined for zero-norm query");
            }
        }

        struct Candidate {
            double rank_dist;
            std::uint64_t id;
            std::uint32_t label;
        };
        // Max-heap ordered so the worst kept candidate sits on top; "worse"
        // means farther, or equally far with a larger entry id.
        const auto worse = [](const Candidate& a, const Candidate& b) {
            if (a.rank_dist != b.rank_dist) return a.rank_dist < b.rank_dist;
            return a.id < b.id;
        };

        const std::size_t keep = std::min<std::size_t>(k, entries_.size());
        std::vector<Candidate> heap;
        heap.reserve(keep + 1);

        std::span<const float> q = query.values();
        for (const DatastoreEntry& e : entries_) {
            double d;
            if (euclidean) {
                d = detail::squared_euclidean(q, e.key.values());
            } else {
                // Mirrors detail::one_minus_cosine bit for bit; the query
                // norm is hoisted out of the scan.
                double dot = 0.0, norm_sq = 0.0;
                std::span<const float> v = e.key.values();
                for (std::size_t i = 0; i < v.size(); ++i) {
                    const double x = q[i], y = v[i];
                    dot += x * y;
                    norm_sq += y * y;
                }
                if (norm_sq == 0.0) {
                    throw DegenerateInputError(
                        "knn_query: entry " + std::to_string(e.id) +
                        " has zero norm, cosine distance undefined");
                }
                if (std::equal(q.begin(), q.end(), v.begin(), v.end())) {
                    d = 0.0;
                } else {
                    const double cos = std::min(
                        1.0,
                        std::max(-1.0, dot / (std::sqrt(query_norm_sq) * std::sqrt(norm_sq))));
                    d = 1.0 - cos;
                }
            }
            Candidate c{d, e.id, e.value};
            if (heap.size() < keep) {
                heap.push_back(c);
                std::push_heap(heap.begin(), heap.end(), worse);
            } else if (worse(c, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), worse);
                heap.back() = c;
                std::push_heap(heap.begin(), heap.end(), worse);
            }
        }

        std::sort_heap(heap.begin(), heap.end(), worse);
        NeighborSet result;
        result.neighbors.reserve(heap.size());
        for (const Candidate& c : heap) {
            const double d = (metric == Metric::Euclidean) ? std::sqrt(c.rank_dist) : c.rank_dist;
            result.neighbors.push_back({c.id, c.label, d});
        }
        return result;
    }

    // Serializes the store to the OBKD binary format described above.
    void save(const std::string& path) const {
        std::string out;
        out.reserve(18 + entries_.size() * (12 + 4 * static_cast<std::size_t>(dim_)));
        out.append(kMagic, 4);
        detail::put_u16(out, kFormatVersion);
        detail::put_u32(out, dim_);
        detail::put_u64(out, entries_.size());
        detail::put_u32(out, static_cast<std::uint32_t>(labels_.size()));
        for (const std::string& name : labels_.names()) {
            detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
            out.append(name);
        }
        const std::int32_t na = labels_.na_id() ? static_cast<std::int32_t>(*labels_.na_id()) : -1;
        detail::put_u32(out, static_cast<std::uint32_t>(na));
        for (const DatastoreEntry& e : entries_) {
            detail::put_u64(out, e.id);
            detail::put_u32(out, e.value);
            for (float v : e.key.values()) detail::put_f32(out, v);
        }

        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw FormatError("save: cannot open '" + path + "' for writing");
        }
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) {
            throw FormatError("save: write to '" + path + "' failed");
        }
    }

    // Loads and validates a store saved by save(). Round-trips bit-exactly.
    static Datastore load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) {
            throw FormatError("load: cannot open '" + path + "'");
        }
        std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

        detail::ByteReader r(std::span<const char>(data.data(), data.size()), path);
        char magic[4];
        r.read_bytes(magic, 4, "magic");
        if (std::memcmp(magic, kMagic, 4) != 0) {
            throw FormatError(path + ": bad magic at offset 0");
        }
        const std::uint16_t version = r.u16("version");
        if (version != kFormatVersion) {
            throw FormatError(path + ": unsupported format version " +
                              std::to_string(version) + " at offset 4");
        }
        const std::uint32_t dim = r.u32("dim");
        const std::uint64_t count = r.u64("entry count");
        if (dim == 0 && count != 0) {
            throw FormatError(path + ": dim 0 with nonzero entry count (offset 6)");
        }

        const std::uint32_t label_count = r.u32("label count");
        if (label_count == 0) {
            throw FormatError(path + ": label table is empty (offset " +
                              std::to_string(r.offset() - 4) + ")");
        }
        std::vector<std::string> names;
        names.reserve(label_count);
        for (std::uint32_t i = 0; i < label_count; ++i) {
            const std::uint32_t len = r.u32("label name length");
            std::string name(len, '\0');
            r.read_bytes(name.data(), len, "label name");
            names.push_back(std::move(name));
        }
        const auto na_raw = static_cast<std::int32_t>(r.u32("na label index"));
        if (na_raw < -1 || na_raw >= static_cast<std::int32_t>(label_count)) {
            throw FormatError(path + ": na label index " + std::to_string(na_raw) +
                              " out of range");
        }
        std::optional<std::string> na_label;
        if (na_raw >= 0) na_label = names[static_cast<std::size_t>(na_raw)];

        LabelTable labels = [&] {
            try {
                return LabelTable(std::move(names), std::move(na_label));
            } catch (const Error& e) {
                throw FormatError(path + ": invalid label table: " + e.what());
            }
        }();

        Datastore store(std::move(labels));
        store.dim_ = dim;
        store.entries_.reserve(count);
        std::uint64_t prev_id = 0;
        for (std::uint64_t i = 0; i < count; ++i) {
            const std::size_t entry_offset = r.offset();
            const std::uint64_t id = r.u64("entry id");
            if (i > 0 && id <= prev_id) {
                throw FormatError(path + ": entry ids not strictly increasing at offset " +
                                  std::to_string(entry_offset));
            }
            prev_id = id;
            const std::uint32_t value = r.u32("entry label id");
            if (value >= store.labels_.size()) {
                throw FormatError(path + ": entry label id " + std::to_string(value) +
                                  " out of range at offset " + std::to_string(entry_offset));
            }
            std::vector<float> key(dim);
            for (std::uint32_t d = 0; d < dim; ++d) key[d] = r.f32("entry key");
            try {
                store.entries_.push_back({id, Embedding(std::move(key)), value});
            } catch (const Error& e) {
                throw FormatError(path + ": invalid entry key at offset " +
                                  std::to_string(entry_offset) + ": " + e.what());
            }
        }
        if (!r.exhausted()) {
            throw FormatError(path + ": trailing bytes after entry " + std::to_string(count) +
                              " at offset " + std::to_string(r.offset()));
        }
        store.next_id_ = store.entries_.empty() ? 0 : store.entries_.back().id + 1;
        return store;
    }

private:
    std::size_t index_of(std::uint64_t id) const {
        // Entries stay sorted by id (ids are append-only and monotone).
        const auto it = std::lower_bound(
            entries_.begin(), entries_.end(), id,
            [](const DatastoreEntry& e, std::uint64_t v) { return e.id < v; });
        if (it == entries_.end() || it->id != id) {
            throw NotFoundError("no entry with id " + std::to_string(id));
        }
        return static_cast<std::size_t>(it - entries_.begin());
    }

    DatastoreEntry& entry_at(std::uint64_t id) { return entries_[index_of(id)]; }

    std::uint32_t dim_ = 0;
    LabelTable labels_;
    std::vector<DatastoreEntry> entries_;
    std::uint64_t next_id_ = 0;
};

}  // namespace obknn
