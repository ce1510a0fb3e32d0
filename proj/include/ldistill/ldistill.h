// Copyright 2026 The ldistill Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to ldistill. All functions return an ldst_status; on failure
 * ldst_last_error() describes the cause for the calling thread. Handles are
 * opaque and owned by the caller, who releases them with the matching
 * *_free function. Strings returned through char** are freed with
 * ldst_string_free. */

#ifndef LDISTILL_LDISTILL_H_
#define LDISTILL_LDISTILL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LDST_API __declspec(dllexport)
#else
#define LDST_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ldst_status {
  LDST_OK = 0,
  LDST_INVALID_ARGUMENT = 1,
  LDST_DOMAIN = 2,
  LDST_SHAPE = 3,
  LDST_INIT = 4,
  LDST_FINGERPRINT = 5,
  LDST_IO = 6,
  LDST_FORMAT = 7,
  LDST_NUMERIC = 8,
  LDST_DEGENERATE = 9,
  LDST_CONFIG = 10,
  LDST_RESOURCE = 11,
  LDST_INTERNAL = 12
} ldst_status;

typedef struct ldst_config ldst_config;
typedef struct ldst_dataset ldst_dataset;
typedef struct ldst_codec ldst_codec;
typedef struct ldst_latents ldst_latents;
typedef struct ldst_buffer ldst_buffer;
typedef struct ldst_synthetic ldst_synthetic;

LDST_API const char* ldst_version(void);
LDST_API const char* ldst_last_error(void);
LDST_API const char* ldst_status_name(int status);
LDST_API void ldst_string_free(char* s);

/* Resolves a relative file path under $LDISTILL_CACHE_DIR when it is set.
 * The result is released with ldst_string_free. */
LDST_API ldst_status ldst_cache_path(const char* path, char** out);

/* Budget arithmetic: floor(ipc * 3 * factor^2 / c_lat). */
LDST_API ldst_status ldst_compute_lpc(int ipc, int factor, int c_lat, int* out);

/* Configuration. path may be NULL for an empty config. set() takes a dotted
 * key and a JSON value text; it overrides whatever the file held. */
LDST_API ldst_status ldst_config_create(const char* path, ldst_config** out);
LDST_API ldst_status ldst_config_set(ldst_config* cfg, const char* key,
                                     const char* json_value);
/* *json_value is set to NULL when the key is absent. */
LDST_API ldst_status ldst_config_get(const ldst_config* cfg, const char* key,
                                     char** json_value);
LDST_API void ldst_config_free(ldst_config* cfg);

/* Real datasets: "desk10" is generated, other registry names read an image
 * folder under root. resolution 0 keeps the dataset default. */
LDST_API ldst_status ldst_dataset_load(const char* name, const char* root,
                                       int resolution, const ldst_config* cfg,
                                       uint64_t seed, ldst_dataset** out);
/* split: "train" or "test". */
LDST_API ldst_status ldst_dataset_count(const ldst_dataset* ds, const char* split,
                                        int64_t* out);
LDST_API ldst_status ldst_dataset_write_pixels(const ldst_dataset* ds,
                                               const char* split, const char* path);
LDST_API void ldst_dataset_free(ldst_dataset* ds);

/* Codecs: "identity" or a codec file. With train_if_missing set and no file
 * at path, a toy codec is trained on ds (train split) and saved there. */
LDST_API ldst_status ldst_codec_obtain(const char* name_or_path,
                                       const ldst_dataset* ds, int factor,
                                       int c_lat, const ldst_config* cfg,
                                       uint64_t seed, int train_if_missing,
                                       ldst_codec** out);
LDST_API ldst_status ldst_codec_fingerprint(const ldst_codec* codec, uint64_t* out);
LDST_API void ldst_codec_free(ldst_codec* codec);

/* Latent caches. pre_upsample is the symmetric resample factor. */
LDST_API ldst_status ldst_latents_encode(const ldst_dataset* ds, const char* split,
                                         const ldst_codec* codec, int pre_upsample,
                                         ldst_latents** out);
LDST_API ldst_status ldst_latents_write(const ldst_latents* lat, const char* path);
/* expected_fingerprint 0 skips the codec check. */
LDST_API ldst_status ldst_latents_read(const char* path,
                                       uint64_t expected_fingerprint,
                                       ldst_latents** out);
LDST_API ldst_status ldst_latents_info(const ldst_latents* lat, int64_t* count,
                                       int* c_lat, int* effective_factor,
                                       uint64_t* codec_fingerprint);
LDST_API void ldst_latents_free(ldst_latents* lat);

/* Expert trajectory buffers (buffer.* config keys). */
LDST_API ldst_status ldst_buffer_record(const ldst_latents* lat,
                                        const ldst_config* cfg, uint64_t seed,
                                        int* skipped, ldst_buffer** out);
LDST_API ldst_status ldst_buffer_write(const ldst_buffer* buf, const char* path);
/* lat may be NULL to skip the dataset fingerprint check. */
LDST_API ldst_status ldst_buffer_read(const char* path, const ldst_latents* lat,
                                      ldst_buffer** out);
LDST_API void ldst_buffer_free(ldst_buffer* buf);

/* Distillation. algo: "dc", "dm" or "mtt" (mtt needs buf). The loss trace is
 * returned as JSON lines when trace_jsonl is non-NULL. */
LDST_API ldst_status ldst_distill(const ldst_latents* lat, const char* algo,
                                  int ipc, int factor, const ldst_config* cfg,
                                  uint64_t seed, const ldst_buffer* buf,
                                  ldst_synthetic** out, char** trace_jsonl);
LDST_API ldst_status ldst_synthetic_write(const ldst_synthetic* syn, const char* path);
LDST_API ldst_status ldst_synthetic_read(const char* path, ldst_synthetic** out);
LDST_API ldst_status ldst_synthetic_info(const ldst_synthetic* syn, int64_t* count,
                                         int* lpc, int* num_classes);
LDST_API void ldst_synthetic_free(ldst_synthetic* syn);

/* Decodes syn once and trains eval.runs classifiers against the test split.
 * Returns the report as one JSON line. */
LDST_API ldst_status ldst_evaluate(const ldst_synthetic* syn, const ldst_codec* codec,
                                   const ldst_dataset* ds, const ldst_config* cfg,
                                   uint64_t seed, char** report_json);

/* Matched pixel vs latent build and DC phases; JSON lines. */
LDST_API ldst_status ldst_bench(const ldst_dataset* ds, const ldst_codec* codec,
                                int pre_upsample, int ipc, const ldst_config* cfg,
                                uint64_t seed, const char* work_dir,
                                char** report_jsonl);

/* Renders JSONL record files into out_dir. */
LDST_API ldst_status ldst_report(const char* const* inputs, size_t num_inputs,
                                 const char* out_dir, char** written);

/* FNV-1a 64 hash of a file's bytes. */
LDST_API ldst_status ldst_file_hash(const char* path, uint64_t* out);

#ifdef __cplusplus
}
#endif

#endif /* LDISTILL_LDISTILL_H_ */
