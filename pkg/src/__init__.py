# src 패키지 초기화 파일 