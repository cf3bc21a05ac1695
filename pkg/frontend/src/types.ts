export interface HealthResponse {
  status: string;
  k_m: number;
  checkpoint_digest: string;
}

export interface ImageResponse {
  image: string; // base64 PNG
}

export interface GridResponse {
  images: string[][];
  center: [number, number] | null;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail?: unknown;
}

export class ApiRequestError extends Error {
  constructor(public body: ApiErrorBody, public status: number) {
    super(`${body.code}: ${body.message}`);
  }
}

export interface AdaptParams {
  image: string;
  guidance: string;
  alpha: number;
  mask?: string;
}

export interface InterpolateParams {
  image: string;
  z: number[];
  alpha: number;
}

export interface GridParams {
  image: string;
  steps: number;
  lo: number;
  hi: number;
  alpha: number;
}

export interface HistoryEntry {
  request: { kind: "adapt"; params: AdaptParams } | { kind: "interpolate"; params: InterpolateParams };
  thumbnail: string;
}
