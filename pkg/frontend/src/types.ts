// Wire types shared with the pipeline's review server (report schema v1).

export interface PixelBoxRegion {
  variant: 'pixel_box';
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  label: string;
  score: number;
}

export interface FeatureRangeRegion {
  variant: 'feature_range';
  index: number;
  lower: number;
  upper: number;
  label: string;
  score: number;
}

export interface TimeIntervalRegion {
  variant: 'time_interval';
  t_start: number;
  t_end: number;
  label: string;
  score: number;
}

export type Region = PixelBoxRegion | FeatureRangeRegion | TimeIntervalRegion;

export interface InputSampleWire {
  kind: 'tabular_vector' | 'image_grayscale' | 'audio_waveform';
  values: number[];
  shape: number[];
  id: string;
}

export interface ReviewSessionWire {
  run_id: string;
  status: 'pending' | 'approved' | 'rejected' | 'timeout';
  property: string;
  input: InputSampleWire;
  attribute_names: string[] | null;
  regions: Region[];
}

export interface VerdictWire {
  status: 'SAFE' | 'UNSAFE' | 'UNKNOWN';
  counterexample: number[] | null;
  stats: { nodes_explored: number; wall_time: number };
}

export interface RunReportWire {
  schema: number;
  run_id: string;
  property: string;
  domain: string;
  grounding: { grounding: { regions: Region[]; source: string } };
  grounded_spec: {
    lower: number[];
    upper: number[];
    target_class: number;
    reference: InputSampleWire;
  } | null;
  verdict: VerdictWire | null;
  approval: { mode: string; status: string; edited: boolean };
}

export interface DecisionBody {
  run_id: string;
  status: 'approved' | 'rejected';
  regions?: Region[];
}
