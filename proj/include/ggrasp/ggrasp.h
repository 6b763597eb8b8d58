#ifndef GGRASP_GGRASP_H
#define GGRASP_GGRASP_H

#include <stddef.h>
#include <stdint.h>

#if defined(GGRASP_BUILDING_LIBRARY)
#define GG_API __attribute__((visibility("default")))
#else
#define GG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every fallible call returns a status; on failure gg_last_error() holds a
   one-line message for the calling thread until its next failing call. */
typedef enum gg_status {
  GG_OK = 0,
  GG_ERR_INVALID_ARGUMENT = 1,
  GG_ERR_DEGENERATE = 2,
  GG_ERR_NO_GROUND_TRUTH = 3,
  GG_ERR_INVALID_DEPTH = 4,
  GG_ERR_IO = 5,
  GG_ERR_FORMAT = 6,
  GG_ERR_CONFIG = 7,
  GG_ERR_DIVERGED = 8,
  GG_ERR_EMPTY_LABELS = 9,
  GG_ERR_SHAPE = 10,
  GG_ERR_BUFFER_TOO_SMALL = 11,
  GG_ERR_NULL_ARGUMENT = 12,
  GG_ERR_INTERNAL = 99
} gg_status;

GG_API const char* gg_last_error(void);
GG_API const char* gg_status_name(gg_status status);
GG_API const char* gg_version(void);

typedef struct gg_point {
  double x, y;
} gg_point;

/* width runs along the grasp axis at `angle` (radians, image frame, y down);
   height is the jaw extent. */
typedef struct gg_rect {
  double cx, cy, angle, width, height;
} gg_rect;

typedef struct gg_pose {
  double cx, cy, angle, width, quality;
} gg_pose;

typedef struct gg_metric_config {
  double jaccard_threshold;
  double angle_threshold; /* radians */
} gg_metric_config;

typedef struct gg_camera {
  double fx, fy, cx, cy;
  double rotation[9]; /* row-major camera-to-world */
  double translation[3];
} gg_camera;

typedef struct gg_world_grasp {
  double x, y, z, yaw, width;
} gg_world_grasp;

typedef struct gg_match {
  int matched;
  double best_jaccard;
  double best_angle_difference;
} gg_match;

/* Opaque handles. */
typedef struct gg_config gg_config;
typedef struct gg_maps gg_maps;
typedef struct gg_pyramid gg_pyramid;
typedef struct gg_dataset gg_dataset;
typedef struct gg_network gg_network;
typedef struct gg_predictions gg_predictions;
typedef struct gg_eval_result gg_eval_result;
typedef struct gg_sweep_result gg_sweep_result;
typedef struct gg_ablation gg_ablation;

/* Geometry */
GG_API gg_metric_config gg_metric_default(void);
GG_API gg_status gg_rect_corners(const gg_rect* r, gg_point out[4]);
GG_API gg_status gg_jaccard(const gg_rect* a, const gg_rect* b, double* out);
GG_API double gg_angle_difference(double a, double b);
GG_API gg_status gg_match_rectangle(const gg_rect* pred, const gg_rect* truths, size_t count,
                                    const gg_metric_config* cfg, gg_match* out);
GG_API gg_status gg_image_to_world(const gg_pose* pose, double depth_at_center, const gg_camera* cam,
                                   gg_world_grasp* out);

/* Run configuration: flat "key = value" pairs over a fixed key set. */
GG_API gg_status gg_config_create(gg_config** out);
GG_API void gg_config_destroy(gg_config* cfg);
GG_API gg_status gg_config_load_file(gg_config* cfg, const char* path);
/* "key=value"; unknown keys fail. */
GG_API gg_status gg_config_set(gg_config* cfg, const char* assignment);
/* String outputs copy at most `capacity` bytes including the terminator and
   report the full size in *needed; GG_ERR_BUFFER_TOO_SMALL when truncated.
   A NULL buffer only queries the size. */
GG_API gg_status gg_config_get(const gg_config* cfg, const char* key, char* buf, size_t capacity, size_t* needed);
GG_API gg_status gg_config_canonical(const gg_config* cfg, char* buf, size_t capacity, size_t* needed);
GG_API gg_status gg_config_hash(const gg_config* cfg, char out[9]);
GG_API gg_status gg_config_validate(const gg_config* cfg);

/* Label codec; encoder and decoder settings come from the config. */
GG_API gg_status gg_point_quality(const gg_config* cfg, const gg_rect* r, double x, double y, double* out);
GG_API gg_status gg_angle_to_bin(const gg_config* cfg, double theta, int* out);
/* `out` holds K values. */
GG_API gg_status gg_angle_vector(const gg_config* cfg, double theta, double* out, size_t capacity);
GG_API gg_status gg_encode(const gg_config* cfg, const gg_rect* rects, size_t count, int height, int width,
                           gg_maps** out);
GG_API void gg_maps_destroy(gg_maps* maps);
GG_API gg_status gg_maps_shape(const gg_maps* maps, int* num_bins, int* height, int* width);
/* Plane copies: quality and width hold H*W values, angle K*H*W. */
GG_API gg_status gg_maps_quality(const gg_maps* maps, double* out, size_t capacity);
GG_API gg_status gg_maps_angle(const gg_maps* maps, double* out, size_t capacity);
GG_API gg_status gg_maps_width(const gg_maps* maps, double* out, size_t capacity);
/* Up to `capacity` poses, best first; *count receives the number written. */
GG_API gg_status gg_decode(const gg_config* cfg, const gg_maps* maps, gg_pose* out, size_t capacity, size_t* count);
GG_API gg_status gg_pose_to_rect(const gg_config* cfg, const gg_pose* pose, gg_rect* out);

GG_API gg_status gg_encode_pyramid(const gg_config* cfg, const gg_rect* rects, size_t count, int height, int width,
                                   gg_pyramid** out);
GG_API void gg_pyramid_destroy(gg_pyramid* p);
GG_API size_t gg_pyramid_levels(const gg_pyramid* p);
/* Copies level i (0 = quarter scale) into a new maps handle. */
GG_API gg_status gg_pyramid_level(const gg_pyramid* p, size_t level, gg_maps** out);
GG_API gg_status gg_pyramid_save(const gg_pyramid* p, const gg_config* cfg, const char* path);
GG_API gg_status gg_pyramid_load(const char* path, gg_pyramid** out);

/* Dataset; the layout follows the config's `dataset` key. */
GG_API gg_status gg_dataset_open(const gg_config* cfg, const char* root, gg_dataset** out);
GG_API void gg_dataset_destroy(gg_dataset* ds);
GG_API size_t gg_dataset_size(const gg_dataset* ds);
GG_API int gg_dataset_skipped_annotations(const gg_dataset* ds);
GG_API gg_status gg_dataset_sample_id(const gg_dataset* ds, size_t index, char* buf, size_t capacity, size_t* needed);
GG_API gg_status gg_dataset_rects(const gg_dataset* ds, size_t index, gg_rect* out, size_t capacity, size_t* count);
/* Label pyramid of one sample in the network input frame. */
GG_API gg_status gg_dataset_encode(const gg_config* cfg, const gg_dataset* ds, size_t index, gg_pyramid** out);
/* Index lists of the configured split; pass NULL buffers to query the sizes. */
GG_API gg_status gg_dataset_split(const gg_config* cfg, const gg_dataset* ds, size_t* train, size_t train_capacity,
                                  size_t* train_count, size_t* test, size_t test_capacity, size_t* test_count);
/* Writes a small synthetic dataset ("cornell" or "jacquard" layout). */
GG_API gg_status gg_write_fixture(const char* root, const char* kind, int count, uint64_t seed);

/* Network */
GG_API gg_status gg_network_create(const gg_config* cfg, gg_network** out);
GG_API gg_status gg_network_load(const char* checkpoint, gg_network** out);
GG_API gg_status gg_network_save(const gg_network* net, const char* checkpoint);
GG_API void gg_network_destroy(gg_network* net);
GG_API size_t gg_network_parameter_count(const gg_network* net);
GG_API int gg_network_head_channels(const gg_network* net);
/* `input` is n x 4 x size x size; head i receives n x (K+2) x (size/4 << i)^2 values. */
GG_API gg_status gg_network_forward(const gg_network* net, const double* input, int n, int size, double* head0,
                                    double* head1, double* head2);

typedef struct gg_train_summary {
  int steps;
  int epochs;
  double initial_loss;
  double final_loss;
  double final_lr;
  double best_val_accuracy; /* negative when nothing was evaluated */
} gg_train_summary;

/* Trains on the configured split, writing metrics.tsv, steps.tsv and
   checkpoint_{best,last}.ggckpt into out_dir. */
GG_API gg_status gg_train(const gg_config* cfg, const gg_dataset* ds, gg_network* net, const char* out_dir,
                          gg_train_summary* summary);

/* Evaluation. Samples come from the config's eval.split ("test", "train" or "all"). */
GG_API gg_status gg_predict(const gg_config* cfg, const gg_network* net, const gg_dataset* ds, gg_predictions** out);
GG_API void gg_predictions_destroy(gg_predictions* p);
GG_API gg_status gg_predictions_save(const gg_predictions* p, const char* path);
GG_API gg_status gg_predictions_load(const char* path, gg_predictions** out);
GG_API size_t gg_predictions_count(const gg_predictions* p);
GG_API gg_status gg_predictions_get(const gg_predictions* p, size_t index, gg_pose* pose, int* valid);
GG_API double gg_predictions_mean_ms(const gg_predictions* p);

GG_API gg_status gg_evaluate(const gg_config* cfg, const gg_predictions* p, const gg_dataset* ds,
                             gg_eval_result** out);
GG_API void gg_eval_result_destroy(gg_eval_result* r);
GG_API double gg_eval_accuracy(const gg_eval_result* r);
GG_API gg_status gg_eval_counts(const gg_eval_result* r, int* matched, int* samples);
/* Writes result.json and result.csv into dir. */
GG_API gg_status gg_eval_write(const gg_eval_result* r, const char* dir);

GG_API gg_status gg_sweep(const gg_config* cfg, const gg_predictions* p, const gg_dataset* ds,
                          gg_sweep_result** out);
GG_API void gg_sweep_result_destroy(gg_sweep_result* s);
GG_API gg_status gg_sweep_accuracy(const gg_sweep_result* s, double jaccard, double angle, double* out);
/* Writes sweep.json, sweep_grid.csv, sweep_jaccard.csv and sweep_angle.csv into dir. */
GG_API gg_status gg_sweep_write(const gg_sweep_result* s, const char* dir);

/* Trains and scores the four GGT/GLFF on/off variants; per-variant training
   output goes to out_dir/<variant>. */
GG_API gg_status gg_ablate(const gg_config* cfg, const gg_dataset* ds, const char* out_dir, gg_ablation** out);
GG_API void gg_ablation_destroy(gg_ablation* a);
GG_API size_t gg_ablation_count(const gg_ablation* a);
GG_API gg_status gg_ablation_row(const gg_ablation* a, size_t index, int* ggt, int* glff, double* accuracy);
/* Writes ablation.json and ablation.csv into dir. */
GG_API gg_status gg_ablation_write(const gg_ablation* a, const char* dir);

/* Heatmaps, overlay and panel for one sample in the network frame. With a
   network the maps are its full-scale prediction, otherwise the encoded labels. */
GG_API gg_status gg_visualize(const gg_config* cfg, const gg_dataset* ds, size_t index, const gg_network* net,
                              const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
