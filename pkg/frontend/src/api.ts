import {
  AdaptParams,
  ApiErrorBody,
  ApiRequestError,
  GridParams,
  GridResponse,
  HealthResponse,
  ImageResponse,
  InterpolateParams,
} from "./types";

/**
 * Thin typed client for the /v1 JSON API. All model math happens on the
 * service side; every image the studio shows is a payload from here.
 */
export class ColorCodeClient {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init: RequestInit, signal?: AbortSignal): Promise<T> {
    const resp = await fetch(this.baseUrl + path, { ...init, signal });
    let body: unknown;
    try {
      body = await resp.json();
    } catch {
      body = undefined;
    }
    if (!resp.ok) {
      const err: ApiErrorBody =
        body && typeof body === "object" && "error" in (body as Record<string, unknown>)
          ? ((body as Record<string, unknown>).error as ApiErrorBody)
          : { code: "http_" + resp.status, message: resp.statusText };
      throw new ApiRequestError(err, resp.status);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown, signal?: AbortSignal): Promise<T> {
    return this.request<T>(
      path,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      },
      signal,
    );
  }

  health(signal?: AbortSignal): Promise<HealthResponse> {
    return this.request<HealthResponse>("/v1/health", { method: "GET" }, signal);
  }

  async enhance(image: string, signal?: AbortSignal): Promise<string> {
    const body = await this.post<ImageResponse>("/v1/enhance", { image }, signal);
    return body.image;
  }

  async adapt(params: AdaptParams, signal?: AbortSignal): Promise<string> {
    const body = await this.post<ImageResponse>("/v1/adapt", params, signal);
    return body.image;
  }

  async interpolate(params: InterpolateParams, signal?: AbortSignal): Promise<string> {
    const body = await this.post<ImageResponse>("/v1/interpolate", params, signal);
    return body.image;
  }

  grid(params: GridParams, signal?: AbortSignal): Promise<GridResponse> {
    return this.post<GridResponse>("/v1/grid", params, signal);
  }
}
