// Wire types shared with the collection server. The JSON shape of
// AnnotationExport is a fixed contract: snake_case keys, points as
// [x, y] pairs in image-pixel coordinates.

export type Decision = "genuine" | "fake";

export interface ImageDims {
  width: number;
  height: number;
}

export interface StrokeRecord {
  points: [number, number][];
  brush_width: number;
  t_start_ms: number;
  t_end_ms: number;
}

export interface AnnotationExport {
  sample_id: string;
  annotator_id: string;
  decision: Decision;
  text_description: string | null;
  strokes: StrokeRecord[];
  image_dims: ImageDims;
}

export interface SampleDescriptor {
  sample_id: string;
  annotated: boolean;
}

export interface Point {
  x: number;
  y: number;
}
